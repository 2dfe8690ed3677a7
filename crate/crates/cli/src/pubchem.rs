//! Formula search against the PubChem PUG REST interface.

use std::thread;
use std::time::Duration;

use msgnn::io::candidates::CandidateSource;
use msgnn::ranking::Candidate;
use msgnn::{Error, Result};
use reqwest::blocking::Client;
use reqwest::StatusCode;

const ATTEMPTS: u32 = 5;
const FIRST_BACKOFF: Duration = Duration::from_millis(500);

pub struct PubChem {
    endpoint: String,
    client: Client,
}

impl PubChem {
    pub fn new(endpoint: &str) -> Result<Self> {
        let client = Client::builder()
            .timeout(Duration::from_secs(60))
            .user_agent(concat!("msgnn/", env!("CARGO_PKG_VERSION")))
            .build()
            .map_err(|e| Error::Candidates(format!("cannot start HTTP client: {e}")))?;
        Ok(PubChem {
            endpoint: endpoint.trim_end_matches('/').to_string(),
            client,
        })
    }

    fn url(&self, formula: &str) -> String {
        format!("{}/compound/fastformula/{formula}/property/CanonicalSMILES/CSV", self.endpoint)
    }

    /// One request. `Ok(None)` asks for a retry.
    fn attempt(&self, url: &str) -> Result<Option<Vec<Candidate>>> {
        let response = match self.client.get(url).send() {
            Ok(r) => r,
            Err(e) if e.is_timeout() || e.is_connect() => {
                log::warn!("request failed: {e}");
                return Ok(None);
            }
            Err(e) => return Err(Error::Candidates(format!("request failed: {e}"))),
        };
        let status = response.status();
        if status == StatusCode::NOT_FOUND {
            return Ok(Some(Vec::new()));
        }
        if status == StatusCode::TOO_MANY_REQUESTS || status.is_server_error() {
            log::warn!("server answered {status}");
            return Ok(None);
        }
        if !status.is_success() {
            return Err(Error::Candidates(format!("server answered {status}")));
        }
        let body = response
            .text()
            .map_err(|e| Error::Candidates(format!("cannot read response: {e}")))?;
        parse_property_csv(&body).map(Some)
    }
}

/// Reads `CID,<smiles column>` rows; ids become `CID<n>`.
pub fn parse_property_csv(body: &str) -> Result<Vec<Candidate>> {
    let mut reader = csv::Reader::from_reader(body.as_bytes());
    let mut out = Vec::new();
    for row in reader.records() {
        let row = row.map_err(|e| Error::Candidates(format!("malformed response: {e}")))?;
        match (row.get(0), row.get(1)) {
            (Some(cid), Some(smiles)) if !smiles.is_empty() => out.push(Candidate::new(format!("CID{cid}"), smiles)),
            _ => return Err(Error::Candidates(format!("malformed response row `{row:?}`"))),
        }
    }
    Ok(out)
}

impl CandidateSource for PubChem {
    fn describe(&self) -> String {
        self.endpoint.clone()
    }

    /// Retries busy or unreachable responses with exponential backoff.
    fn fetch(&self, formula: &str) -> Result<Vec<Candidate>> {
        let url = self.url(formula);
        let mut wait = FIRST_BACKOFF;
        for attempt in 1..=ATTEMPTS {
            log::info!("GET {url} (attempt {attempt})");
            if let Some(found) = self.attempt(&url)? {
                return Ok(found);
            }
            if attempt < ATTEMPTS {
                thread::sleep(wait);
                wait *= 2;
            }
        }
        Err(Error::Candidates(format!("no usable answer after {ATTEMPTS} attempts")))
    }
}
