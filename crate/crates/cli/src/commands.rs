use std::collections::{BTreeSet, HashMap, HashSet};
use std::fs::{self, File};
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::thread;

use msgnn::chem::{parse_smiles, skeleton_key};
use msgnn::io::candidates::{
    candidate_set_for, fetch_candidates, read_candidates, validate_formula, CandidateCache, CandidateSource, Fetched,
};
use msgnn::io::checkpoint::Checkpoint;
use msgnn::io::config::RunConfig;
use msgnn::io::manifest::{parse_split, render_split, DatasetManifest};
use msgnn::io::msp::{parse_msp, select_spectra, MspRecord};
use msgnn::io::reports::{self, ReportKind, SpectrumRow};
use msgnn::io::{write_atomic, Meta};
use msgnn::model::suite::{run_suite, SUITE_TOLERANCE};
use msgnn::model::{Model, SpectrumPredictor};
use msgnn::ranking::{
    build_report, evaluate, mean_set_size, rank_candidates, EvalOptions, Provenance, Query, RecallReport,
    ReferencePredictor, Stratum,
};
use msgnn::spectrum::prepare_target;
use msgnn::training::{evaluate_similarity, fit, split_dataset, Example};
use msgnn::Error;

use crate::pubchem::PubChem;
use crate::{Cli, Command, PredictorArgs};

pub const CACHE_ENV: &str = "MSGNN_CACHE_DIR";
const DEFAULT_CACHE: &str = "candidate_cache";

#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Config(_) => 1,
            Error::Data(_)
            | Error::Msp(_)
            | Error::Smiles(_)
            | Error::Csv(_)
            | Error::Io(_)
            | Error::Checkpoint(_)
            | Error::Candidates(_)
            | Error::Spectrum(_) => 2,
            _ => 3,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

fn data(message: impl Into<String>) -> Failure {
    Failure {
        code: 2,
        message: message.into(),
    }
}

type Outcome<T = ()> = Result<T, Failure>;

/// Adds a path to errors from reading it.
fn reading<T>(path: &Path, r: msgnn::Result<T>) -> Outcome<T> {
    r.map_err(|e| {
        let mut f = Failure::from(e);
        f.message = format!("{}: {}", path.display(), f.message);
        f
    })
}

struct Settings {
    config: RunConfig,
    seed: u64,
}

impl Settings {
    fn from_cli(cli: &Cli) -> Outcome<Self> {
        let mut config = match &cli.config {
            Some(path) => RunConfig::read(path)?,
            None => RunConfig::default(),
        };
        for o in &cli.overrides {
            let (k, v) = o
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("`--set {o}` is not KEY=VALUE")))?;
            config.set(k.trim(), v.trim())?;
        }
        if let Some(seed) = cli.seed {
            config.train.seed = seed;
        }
        config.validate()?;
        Ok(Settings {
            seed: config.train.seed,
            config,
        })
    }

    /// Provenance lines: the command, the tool version and every setting.
    fn meta(&self, command: &str) -> Meta {
        let mut meta = vec![
            ("command".to_string(), command.to_string()),
            ("version".to_string(), env!("CARGO_PKG_VERSION").to_string()),
        ];
        meta.extend(self.config.to_pairs());
        meta
    }
}

fn write(path: &Path, text: &str) -> Outcome {
    reading(path, write_atomic(path, text.as_bytes()))
}

fn read_msp(path: &Path) -> Outcome<Vec<MspRecord>> {
    let file = File::open(path).map_err(|e| data(format!("{}: {e}", path.display())))?;
    reading(path, parse_msp(BufReader::new(file)).map_err(Error::from))
}

fn parent(path: &Path) -> PathBuf {
    match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    }
}

/// `library` relative to the directory of `output` when it lies below it,
/// absolute otherwise.
fn source_reference(library: &Path, output: &Path) -> Outcome<String> {
    let dir = parent(output);
    fs::create_dir_all(&dir).map_err(|e| data(format!("{}: {e}", dir.display())))?;
    let lib = fs::canonicalize(library).map_err(|e| data(format!("{}: {e}", library.display())))?;
    let dir = fs::canonicalize(&dir).map_err(|e| data(format!("{}: {e}", dir.display())))?;
    Ok(lib.strip_prefix(&dir).unwrap_or(&lib).display().to_string())
}

fn cache_dir(flag: &Option<PathBuf>) -> PathBuf {
    flag.clone()
        .or_else(|| std::env::var_os(CACHE_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(DEFAULT_CACHE))
}

pub fn run(cli: Cli) -> Outcome {
    let settings = Settings::from_cli(&cli)?;
    match cli.command {
        Command::Prepare { library, output } => prepare(&settings, &library, &output),
        Command::Split {
            manifest,
            output,
            test_size,
        } => split(&settings, &manifest, &output, test_size),
        Command::Train {
            manifest,
            split,
            output,
            log,
        } => {
            let log = log.unwrap_or_else(|| output.with_extension("log.csv"));
            train(&settings, &manifest, &split, &output, &log)
        }
        Command::Predict {
            checkpoint,
            smiles,
            input,
            output,
            format,
        } => predict(&checkpoint, smiles, input.as_deref(), &output, format.as_deref()),
        Command::Rank {
            predictor,
            query,
            candidates,
            output,
        } => rank(&settings, &predictor, &query, &candidates, &output),
        Command::Evaluate {
            predictor,
            manifest,
            split,
            subset,
            cache,
            fetch,
            avg_size,
            population_avg,
            stratify,
            stratum_size,
            ks,
            output,
            rankings,
        } => {
            let strata = match (stratify.as_deref(), stratum_size) {
                (None, _) => vec![None],
                (Some(which), Some(m)) => match which {
                    "both" => vec![Some((Stratum::MostSimilar, m)), Some((Stratum::LeastSimilar, m))],
                    other => vec![Some((other.parse::<Stratum>()?, m))],
                },
                (Some(_), None) => return Err(Error::Config("--stratify needs --stratum-size".into()).into()),
            };
            let plan = EvalPlan {
                split: split.zip(subset),
                cache: cache_dir(&cache),
                fetch,
                sizes: if avg_size.is_empty() { vec![None] } else { avg_size.into_iter().map(Some).collect() },
                population_avg,
                strata,
                ks,
            };
            evaluate_cmd(&settings, &predictor, &manifest, &plan, &output, rankings.as_deref())
        }
        Command::FetchCandidates {
            formulas,
            manifest,
            cache,
            offline,
        } => fetch_cmd(&settings, formulas, manifest.as_deref(), &cache_dir(&cache), offline),
        Command::Gradcheck { coords } => gradcheck(&settings, coords),
        Command::Report { inputs, output } => report(&inputs, &output),
    }
}

fn prepare(s: &Settings, library: &Path, output: &Path) -> Outcome {
    let records = read_msp(library)?;
    let (selected, stats) = select_spectra(&records, &s.config.selection);
    let source = source_reference(library, output)?;
    let mut meta = s.meta("prepare");
    meta.extend([
        ("library".to_string(), source.clone()),
        ("records".to_string(), stats.records.to_string()),
        ("molecules".to_string(), stats.molecules.to_string()),
        ("kept".to_string(), stats.kept.to_string()),
        ("unparseable".to_string(), stats.unparseable.to_string()),
        ("dropped_molecules".to_string(), stats.dropped_molecules.to_string()),
        ("ties".to_string(), stats.ties.to_string()),
    ]);
    let manifest = DatasetManifest::from_selection(&selected, &source, meta);
    write(output, &manifest.render())?;
    println!(
        "{} records, {} molecules, kept {} ({} unparseable records, {} molecules without a qualifying spectrum, {} ties)",
        stats.records, stats.molecules, stats.kept, stats.unparseable, stats.dropped_molecules, stats.ties
    );
    Ok(())
}

fn split(s: &Settings, manifest: &Path, output: &Path, test_size: usize) -> Outcome {
    let m = reading(manifest, DatasetManifest::read(manifest))?;
    let parts = split_dataset(&m.ids(), test_size, s.seed)?;
    let mut meta = s.meta("split");
    meta.extend([
        ("manifest".to_string(), manifest.display().to_string()),
        ("test_size".to_string(), test_size.to_string()),
    ]);
    write(output, &render_split(&parts, &meta))?;
    println!(
        "train {}, validation {}, test {}",
        parts.train.len(),
        parts.validation.len(),
        parts.test.len()
    );
    Ok(())
}

/// Examples for every manifest entry, keyed by molecule id.
fn load_examples(manifest_path: &Path, manifest: &DatasetManifest, s: &Settings) -> Outcome<HashMap<String, Example>> {
    let records = reading(manifest_path, manifest.load_records(&parent(manifest_path)))?;
    let transform = s.config.train.transform;
    let mut out = HashMap::new();
    for (entry, record) in manifest.entries.iter().zip(&records) {
        let fail = |e: Error| data(format!("molecule `{}`: {e}", entry.molecule_id));
        let graph = parse_smiles(&entry.smiles).map_err(|e| fail(e.into()))?;
        let target = record
            .peak_list()
            .and_then(|p| prepare_target(&p, transform))
            .map_err(fail)?;
        out.insert(
            entry.molecule_id.clone(),
            Example {
                id: entry.molecule_id.clone(),
                graph,
                target,
            },
        );
    }
    Ok(out)
}

fn pick(examples: &HashMap<String, Example>, ids: &[String], what: &str) -> Outcome<Vec<Example>> {
    ids.iter()
        .map(|id| {
            examples
                .get(id)
                .cloned()
                .ok_or_else(|| data(format!("{what} molecule `{id}` is not in the manifest")))
        })
        .collect()
}

fn train(s: &Settings, manifest_path: &Path, split_path: &Path, output: &Path, log_path: &Path) -> Outcome {
    let manifest = reading(manifest_path, DatasetManifest::read(manifest_path))?;
    let text = fs::read_to_string(split_path).map_err(|e| data(format!("{}: {e}", split_path.display())))?;
    let (parts, _) = reading(split_path, parse_split(&text))?;
    let examples = load_examples(manifest_path, &manifest, s)?;
    let train_set = pick(&examples, &parts.train, "training")?;
    let val_set = pick(&examples, &parts.validation, "validation")?;
    let model = Model::new(s.config.model.clone(), s.seed)?;
    let (model, report) = fit(model, &train_set, &val_set, &s.config.train)?;
    let val_cosine = evaluate_similarity(&model, &val_set)?;

    let mut checkpoint = Checkpoint::from_model(&model, s.seed);
    checkpoint.train = s.config.train.to_pairs().into_iter().map(|(k, v)| (k.to_string(), v)).collect();
    checkpoint.metrics = vec![
        ("best_val_loss".into(), report.best_val_loss),
        ("best_epoch".into(), report.best_epoch as f64),
        ("epochs".into(), report.epochs.len() as f64),
        ("val_cosine".into(), val_cosine),
    ];
    reading(output, checkpoint.save(output))?;

    let mut meta = s.meta("train");
    meta.extend([
        ("manifest".to_string(), manifest_path.display().to_string()),
        ("split".to_string(), split_path.display().to_string()),
        ("best_epoch".to_string(), report.best_epoch.to_string()),
        ("stop".to_string(), report.stop.as_str().to_string()),
    ]);
    write(log_path, &reports::write_training_log(&report.epochs, &meta)?)?;
    println!(
        "{} epochs ({}), best epoch {} with validation loss {:.6e}, validation cosine {:.4}",
        report.epochs.len(),
        report.stop.as_str(),
        report.best_epoch,
        report.best_val_loss,
        val_cosine
    );
    Ok(())
}

fn predict(checkpoint: &Path, smiles: Vec<String>, input: Option<&Path>, output: &Path, format: Option<&str>) -> Outcome {
    let ck = reading(checkpoint, Checkpoint::load(checkpoint))?;
    let model = ck.model()?;
    let mut molecules: Vec<(String, String)> = smiles
        .into_iter()
        .enumerate()
        .map(|(i, s)| (format!("S{}", i + 1), s))
        .collect();
    if let Some(path) = input {
        let text = fs::read_to_string(path).map_err(|e| data(format!("{}: {e}", path.display())))?;
        for line in text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#')) {
            let (id, smi) = match line.split_once('\t') {
                Some((id, smi)) => (id.trim().to_string(), smi.trim().to_string()),
                None => (format!("S{}", molecules.len() + 1), line.to_string()),
            };
            molecules.push((id, smi));
        }
    }
    if molecules.is_empty() {
        return Err(Error::Config("nothing to predict; pass --smiles or --input".into()).into());
    }
    let graphs = molecules
        .iter()
        .map(|(id, smi)| parse_smiles(smi).map_err(|e| data(format!("molecule `{id}`: {e}"))))
        .collect::<Outcome<Vec<_>>>()?;
    let refs: Vec<_> = graphs.iter().collect();
    let spectra = model.predict_many(&refs)?;
    let rows: Vec<SpectrumRow> = molecules
        .into_iter()
        .zip(spectra)
        .map(|((id, smiles), spectrum)| SpectrumRow { id, smiles, spectrum })
        .collect();
    let msp = match format {
        Some(f) => f == "msp",
        None => output.extension().is_some_and(|e| e.eq_ignore_ascii_case("msp")),
    };
    let text = if msp {
        reports::spectra_to_msp(&rows)
    } else {
        let mut meta = vec![
            ("command".to_string(), "predict".to_string()),
            ("checkpoint".to_string(), checkpoint.display().to_string()),
            ("seed".to_string(), ck.seed.to_string()),
        ];
        meta.extend(ck.config.to_pairs().into_iter().map(|(k, v)| (k.to_string(), v)));
        reports::write_spectra(&rows, &meta)?
    };
    write(output, &text)?;
    println!("wrote {} predicted spectra to {}", rows.len(), output.display());
    Ok(())
}

fn load_predictor(args: &PredictorArgs, s: &Settings) -> Outcome<(Box<dyn SpectrumPredictor>, Meta)> {
    if let Some(path) = &args.checkpoint {
        let ck = reading(path, Checkpoint::load(path))?;
        let meta = vec![
            ("checkpoint".to_string(), path.display().to_string()),
            ("checkpoint_seed".to_string(), ck.seed.to_string()),
        ];
        return Ok((Box::new(ck.model()?), meta));
    }
    let path = args.reference.as_ref().expect("clap requires one predictor");
    let transform = s.config.train.transform;
    let mut table = ReferencePredictor::new(transform);
    for (i, record) in read_msp(path)?.iter().enumerate() {
        let Some(graph) = record.smiles.as_deref().and_then(|smi| parse_smiles(smi).ok()) else {
            log::warn!("reference record {i} (`{}`) has no usable SMILES", record.name);
            continue;
        };
        match record.peak_list().and_then(|p| prepare_target(&p, transform)) {
            Ok(spectrum) => table.insert(&graph, spectrum)?,
            Err(e) => log::warn!("reference record {i} (`{}`): {e}", record.name),
        }
    }
    if table.is_empty() {
        return Err(data(format!("{}: no usable reference spectra", path.display())));
    }
    Ok((Box::new(table), vec![("reference".to_string(), path.display().to_string())]))
}

fn rank(s: &Settings, args: &PredictorArgs, query: &Path, candidates: &Path, output: &Path) -> Outcome {
    let (predictor, predictor_meta) = load_predictor(args, s)?;
    let records = read_msp(query)?;
    let fixed = if candidates.is_dir() {
        None
    } else {
        Some(reading(candidates, read_candidates(candidates))?.1)
    };
    let cache = CandidateCache::new(candidates);
    let mut used = HashSet::new();
    let mut results = Vec::new();
    for (i, record) in records.iter().enumerate() {
        let smiles = record
            .smiles
            .as_deref()
            .ok_or_else(|| data(format!("query record {i} (`{}`) has no SMILES", record.name)))?;
        let graph = parse_smiles(smiles).map_err(|e| data(format!("query `{}`: {e}", record.name)))?;
        let spectrum = record
            .peak_list()
            .and_then(|p| prepare_target(&p, predictor.transform()))
            .map_err(|e| data(format!("query `{}`: {e}", record.name)))?;
        let pool = match &fixed {
            Some(list) => list.clone(),
            None => fetch_candidates(&graph.formula().to_string(), &cache, None)?.candidates,
        };
        let key = skeleton_key(&graph);
        let target_id = pool
            .iter()
            .find(|c| parse_smiles(&c.smiles).is_ok_and(|g| skeleton_key(&g) == key))
            .map_or_else(|| record.name.clone(), |c| c.id.clone());
        let mut query_id = record.name.clone();
        if !used.insert(query_id.clone()) {
            query_id = format!("{}#{i}", record.name);
            used.insert(query_id.clone());
        }
        let set = candidate_set_for(&query_id, &target_id, smiles, &pool, Provenance::Fetched)?;
        let result = rank_candidates(&spectrum, &set, predictor.as_ref())?;
        println!("{}: target {} ranked {} of {}", result.query_id, result.target_id, result.rank_of_target, result.ranked.len());
        results.push(result);
    }
    let mut meta = s.meta("rank");
    meta.extend(predictor_meta);
    meta.extend([
        ("query".to_string(), query.display().to_string()),
        ("candidates".to_string(), candidates.display().to_string()),
    ]);
    write(output, &reports::write_rankings(&results, &meta)?)
}

struct EvalPlan {
    split: Option<(PathBuf, String)>,
    cache: PathBuf,
    fetch: bool,
    sizes: Vec<Option<f64>>,
    population_avg: Option<f64>,
    strata: Vec<Option<(Stratum, usize)>>,
    ks: Vec<usize>,
}

fn evaluate_cmd(
    s: &Settings,
    args: &PredictorArgs,
    manifest_path: &Path,
    plan: &EvalPlan,
    output: &Path,
    rankings: Option<&Path>,
) -> Outcome {
    let (predictor, predictor_meta) = load_predictor(args, s)?;
    let mut manifest = reading(manifest_path, DatasetManifest::read(manifest_path))?;
    if let Some((path, subset)) = &plan.split {
        let text = fs::read_to_string(path).map_err(|e| data(format!("{}: {e}", path.display())))?;
        let (parts, _) = reading(path, parse_split(&text))?;
        let ids = match subset.as_str() {
            "train" => parts.train,
            "validation" => parts.validation,
            _ => parts.test,
        };
        manifest = manifest.subset(&ids);
    }
    if manifest.entries.is_empty() {
        return Err(data("no molecules to evaluate"));
    }
    let records = reading(manifest_path, manifest.load_records(&parent(manifest_path)))?;
    let cache = CandidateCache::new(&plan.cache);
    let online = if plan.fetch { Some(PubChem::new(&s.config.endpoint)?) } else { None };
    let source = online.as_ref().map(|p| p as &dyn CandidateSource);
    let transform = predictor.transform();
    let mut queries = Vec::with_capacity(manifest.entries.len());
    for (entry, record) in manifest.entries.iter().zip(&records) {
        let fail = |e: Error| data(format!("molecule `{}`: {e}", entry.molecule_id));
        let graph = parse_smiles(&entry.smiles).map_err(|e| fail(e.into()))?;
        let spectrum = record.peak_list().and_then(|p| prepare_target(&p, transform)).map_err(fail)?;
        let fetched = fetch_candidates(&graph.formula().to_string(), &cache, source)?;
        let candidates = candidate_set_for(
            &entry.molecule_id,
            &entry.molecule_id,
            &entry.smiles,
            &fetched.candidates,
            Provenance::Fetched,
        )?;
        queries.push(Query { spectrum, candidates });
    }
    let population = plan.population_avg.unwrap_or_else(|| mean_set_size(&queries));
    let mut tables: Vec<(String, RecallReport)> = Vec::new();
    for stratum in &plan.strata {
        for size in &plan.sizes {
            let mut label = Vec::new();
            if let Some((st, m)) = stratum {
                label.push(format!("{}/m={m}", st.as_str()));
            }
            if let Some(size) = size {
                label.push(format!("avg_size={size}"));
            }
            let label = if label.is_empty() { "full".to_string() } else { label.join(";") };
            let options = EvalOptions {
                avg_size: *size,
                population_avg: Some(population),
                stratify: *stratum,
                seed: s.seed,
            };
            let results = evaluate(&queries, predictor.as_ref(), &options)?;
            let report = build_report(&results, &plan.ks)?;
            let recalls: Vec<String> = report
                .ks
                .iter()
                .zip(&report.recall)
                .map(|(k, r)| format!("recall@{k} {:.3}", r))
                .collect();
            println!("{label}: {}, average rank {:.2} over {} queries", recalls.join(", "), report.average_rank, report.queries);
            if let Some(dir) = rankings {
                let name: String = label
                    .chars()
                    .map(|c| if c.is_ascii_alphanumeric() || c == '.' { c } else { '_' })
                    .collect();
                let mut meta = s.meta("evaluate");
                meta.push(("setting".into(), label.clone()));
                write(&dir.join(format!("{name}.csv")), &reports::write_rankings(&results, &meta)?)?;
            }
            tables.push((label, report));
        }
    }
    let mut meta = s.meta("evaluate");
    meta.extend(predictor_meta);
    meta.extend([
        ("manifest".to_string(), manifest_path.display().to_string()),
        ("population_avg".to_string(), format!("{population:?}")),
        ("mean_set_size".to_string(), format!("{:?}", mean_set_size(&queries))),
    ]);
    write(output, &reports::write_recall(&tables, &meta)?)
}

fn fetch_cmd(s: &Settings, formulas: Vec<String>, manifest: Option<&Path>, cache_dir: &Path, offline: bool) -> Outcome {
    let mut wanted: BTreeSet<String> = BTreeSet::new();
    for f in formulas {
        validate_formula(&f)?;
        wanted.insert(f.trim().to_string());
    }
    if let Some(path) = manifest {
        let m = reading(path, DatasetManifest::read(path))?;
        for e in &m.entries {
            wanted.insert(parse_smiles(&e.smiles).map_err(Error::from)?.formula().to_string());
        }
    }
    if wanted.is_empty() {
        return Err(Error::Config("no formulas given".into()).into());
    }
    let formulas: Vec<String> = wanted.into_iter().collect();
    let cache = CandidateCache::new(cache_dir);
    let online = if offline { None } else { Some(PubChem::new(&s.config.endpoint)?) };
    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<(usize, msgnn::Result<Fetched>)>> = Mutex::new(Vec::new());
    // two workers keep at most two requests in flight
    thread::scope(|scope| {
        for _ in 0..2 {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some(formula) = formulas.get(i) else { break };
                let r = fetch_candidates(formula, &cache, online.as_ref().map(|p| p as &dyn CandidateSource));
                results.lock().expect("no worker panics").push((i, r));
            });
        }
    });
    let mut results = results.into_inner().expect("no worker panics");
    results.sort_by_key(|(i, _)| *i);
    let mut failures = Vec::new();
    for (i, r) in results {
        match r {
            Ok(f) => println!(
                "{}: {} candidates ({})",
                f.formula,
                f.candidates.len(),
                if f.from_cache { "cached" } else { "fetched" }
            ),
            Err(e) => {
                eprintln!("{}: {e}", formulas[i]);
                failures.push(Failure::from(e));
            }
        }
    }
    match failures.len() {
        0 => Ok(()),
        1 => Err(failures.pop().expect("one failure")),
        n => Err(data(format!("{n} of {} formulas failed", formulas.len()))),
    }
}

fn gradcheck(s: &Settings, coords: usize) -> Outcome {
    let report = run_suite(s.seed, coords)?;
    for c in &report.cases {
        println!(
            "{:36} max rel. error {:.3e} ({} coordinates, {} skipped at kinks)",
            c.label, c.max_rel_error, c.coords_checked, c.coords_skipped
        );
    }
    println!("max relative error: {:.3e}", report.max_rel_error());
    if report.passed() {
        Ok(())
    } else {
        Err(Failure {
            code: 3,
            message: format!("gradient check failed: {:.3e} >= {SUITE_TOLERANCE:e}", report.max_rel_error()),
        })
    }
}

fn report(inputs: &[PathBuf], output: &Path) -> Outcome {
    if inputs.is_empty() {
        return Err(Error::Config("no input CSVs".into()).into());
    }
    let mut recall = Vec::new();
    let mut training = Vec::new();
    for path in inputs {
        let text = fs::read_to_string(path).map_err(|e| data(format!("{}: {e}", path.display())))?;
        let run = path.file_stem().map_or_else(|| path.display().to_string(), |s| s.to_string_lossy().into_owned());
        match reports::detect_kind(&text) {
            Some(ReportKind::Recall) => recall.push((run, reading(path, reports::read_recall(&text))?.0)),
            Some(ReportKind::Ranking) => {
                let (results, _) = reading(path, reports::read_rankings(&text))?;
                recall.push((run, vec![("rankings".to_string(), build_report(&results, &[1, 5, 10, 20])?)]));
            }
            Some(ReportKind::Training) => training.push((run, reading(path, reports::read_training_log(&text))?.0)),
            Some(ReportKind::Spectrum) | None => {
                return Err(data(format!("{}: not a recall, ranking or training CSV", path.display())))
            }
        }
    }
    if !recall.is_empty() {
        write(&output.join("recall_table.csv"), &reports::aggregate_recall(&recall)?)?;
        println!("wrote {}", output.join("recall_table.csv").display());
    }
    if !training.is_empty() {
        let (curves, summary) = reports::aggregate_training(&training)?;
        write(&output.join("training_curves.csv"), &curves)?;
        write(&output.join("training_summary.csv"), &summary)?;
        println!("wrote {} and training_summary.csv", output.join("training_curves.csv").display());
    }
    Ok(())
}
