use std::fmt;
use std::str::FromStr;

use crate::chem::{DEFAULT_LENGTH, DEFAULT_RADIUS, FEATURE_SCHEMA_VERSION};
use crate::error::{Error, Result};
use crate::spectrum::{Transform, NUM_BINS};

macro_rules! keyword_enum {
    ($(#[$meta:meta])* $name:ident { $($(#[$vmeta:meta])* $variant:ident => $text:literal),+ $(,)? }) => {
        $(#[$meta])*
        #[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
        pub enum $name {
            $($(#[$vmeta])* $variant),+
        }

        impl $name {
            pub fn as_str(self) -> &'static str {
                match self {
                    $($name::$variant => $text),+
                }
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }

        impl FromStr for $name {
            type Err = Error;

            fn from_str(s: &str) -> Result<Self> {
                match s {
                    $($text => Ok($name::$variant),)+
                    other => Err(Error::Config(format!(
                        concat!("unknown ", stringify!($name), " `{}` (expected one of: {})"),
                        other,
                        [$($text),+].join(", ")
                    ))),
                }
            }
        }
    };
}

keyword_enum!(
    /// How molecules are encoded before the head.
    Encoder {
        Gcn => "gcn",
        Gat => "gat",
        /// Count fingerprint fed straight to the head; the baseline.
        Fingerprint => "fingerprint",
    }
);

keyword_enum!(Pooling {
    GlobalMax => "global_max",
    GlobalAvg => "global_avg",
    GlobalAttention => "global_attention",
});

keyword_enum!(HeadKind {
    Dense => "dense",
    Glu => "glu",
});

#[derive(Clone, Debug, PartialEq)]
pub struct ModelConfig {
    pub encoder: Encoder,
    pub num_layers: usize,
    pub hidden_width: usize,
    pub use_bond_features: bool,
    pub pooling: Pooling,
    pub head: HeadKind,
    /// Widths of the hidden dense layers before the output stage.
    pub head_hidden: Vec<usize>,
    pub dropout_rate: f64,
    /// Negative slope of the leaky ReLU on attention logits.
    pub attention_slope: f64,
    pub output_dim: usize,
    pub schema_version: u32,
    /// Intensity transform of the targets; predictions live in this space.
    pub transform: Transform,
    pub fingerprint_radius: usize,
    pub fingerprint_length: usize,
}

impl Default for ModelConfig {
    /// Ten GAT layers of width 64 with bond features, max pooling and a
    /// gated output stage.
    fn default() -> Self {
        ModelConfig {
            encoder: Encoder::Gat,
            num_layers: 10,
            hidden_width: 64,
            use_bond_features: true,
            pooling: Pooling::GlobalMax,
            head: HeadKind::Glu,
            head_hidden: vec![256],
            dropout_rate: 0.5,
            attention_slope: 0.2,
            output_dim: NUM_BINS,
            schema_version: FEATURE_SCHEMA_VERSION,
            transform: Transform::Log,
            fingerprint_radius: DEFAULT_RADIUS,
            fingerprint_length: DEFAULT_LENGTH,
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .trim()
        .parse()
        .map_err(|_| Error::Config(format!("invalid value `{value}` for `{key}`")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value.trim() {
        "true" | "yes" | "on" | "1" => Ok(true),
        "false" | "no" | "off" | "0" => Ok(false),
        _ => Err(Error::Config(format!("invalid boolean `{value}` for `{key}`"))),
    }
}

pub(crate) fn parse_widths(key: &str, value: &str) -> Result<Vec<usize>> {
    let v = value.trim();
    if v.is_empty() || v == "none" {
        return Ok(Vec::new());
    }
    v.split(',').map(|w| parse(key, w)).collect()
}

impl ModelConfig {
    /// The fingerprint MLP baseline: radius 2, 4096 buckets, dense head.
    pub fn fingerprint_baseline() -> Self {
        ModelConfig {
            encoder: Encoder::Fingerprint,
            head: HeadKind::Dense,
            ..ModelConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        if self.encoder != Encoder::Fingerprint {
            if self.num_layers == 0 {
                return fail("num_layers must be at least 1".into());
            }
            if self.hidden_width == 0 {
                return fail("hidden_width must be at least 1".into());
            }
        } else if self.fingerprint_length == 0 {
            return fail("fingerprint_length must be at least 1".into());
        }
        if self.output_dim != NUM_BINS {
            return fail(format!("output_dim must be {NUM_BINS}, got {}", self.output_dim));
        }
        if self.head_hidden.contains(&0) {
            return fail("head_hidden widths must be positive".into());
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return fail(format!("dropout_rate {} outside [0, 1)", self.dropout_rate));
        }
        if !self.attention_slope.is_finite() {
            return fail("attention_slope must be finite".into());
        }
        if self.schema_version != FEATURE_SCHEMA_VERSION {
            return fail(format!(
                "feature schema {} is not supported (this build uses {FEATURE_SCHEMA_VERSION})",
                self.schema_version
            ));
        }
        Ok(())
    }

    /// Applies one `key = value` setting. Returns `Ok(false)` for keys this
    /// type does not own.
    pub fn set(&mut self, key: &str, value: &str) -> Result<bool> {
        match key {
            "model" | "encoder" => self.encoder = value.trim().parse()?,
            "layers" | "num_layers" => self.num_layers = parse(key, value)?,
            "hidden" | "hidden_width" => self.hidden_width = parse(key, value)?,
            "bond_features" => self.use_bond_features = parse_bool(key, value)?,
            "pooling" => self.pooling = value.trim().parse()?,
            "head" => self.head = value.trim().parse()?,
            "head_hidden" => self.head_hidden = parse_widths(key, value)?,
            "dropout" | "dropout_rate" => self.dropout_rate = parse(key, value)?,
            "attention_slope" => self.attention_slope = parse(key, value)?,
            "output_dim" => self.output_dim = parse(key, value)?,
            "schema_version" => self.schema_version = parse(key, value)?,
            "transform" => self.transform = value.trim().parse()?,
            "fingerprint_radius" => self.fingerprint_radius = parse(key, value)?,
            "fingerprint_length" => self.fingerprint_length = parse(key, value)?,
            _ => return Ok(false),
        }
        Ok(true)
    }

    /// Every setting as `(key, value)` text, readable by [`ModelConfig::set`].
    pub fn to_pairs(&self) -> Vec<(&'static str, String)> {
        let widths = if self.head_hidden.is_empty() {
            "none".to_string()
        } else {
            self.head_hidden.iter().map(|w| w.to_string()).collect::<Vec<_>>().join(",")
        };
        vec![
            ("model", self.encoder.to_string()),
            ("layers", self.num_layers.to_string()),
            ("hidden", self.hidden_width.to_string()),
            ("bond_features", self.use_bond_features.to_string()),
            ("pooling", self.pooling.to_string()),
            ("head", self.head.to_string()),
            ("head_hidden", widths),
            ("dropout", format!("{:?}", self.dropout_rate)),
            ("attention_slope", format!("{:?}", self.attention_slope)),
            ("output_dim", self.output_dim.to_string()),
            ("schema_version", self.schema_version.to_string()),
            ("transform", self.transform.to_string()),
            ("fingerprint_radius", self.fingerprint_radius.to_string()),
            ("fingerprint_length", self.fingerprint_length.to_string()),
        ]
    }

    pub fn from_pairs<'a>(pairs: impl IntoIterator<Item = (&'a str, &'a str)>) -> Result<Self> {
        let mut config = ModelConfig::default();
        for (k, v) in pairs {
            if !config.set(k, v)? {
                return Err(Error::Config(format!("unknown model setting `{k}`")));
            }
        }
        config.validate()?;
        Ok(config)
    }
}
