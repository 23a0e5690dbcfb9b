use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::Activation;

/// Every predictor in the zoo.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ModelKind {
    #[serde(rename = "lr")]
    Lr,
    #[serde(rename = "poly2")]
    Poly2,
    #[serde(rename = "fm")]
    Fm,
    #[serde(rename = "dnn")]
    Dnn,
    #[serde(rename = "fnn")]
    Fnn,
    #[serde(rename = "ipnn")]
    Ipnn,
    #[serde(rename = "opnn")]
    Opnn,
    #[serde(rename = "pnn*")]
    PnnStar,
    #[serde(rename = "lr&dnn")]
    LrDnn,
    #[serde(rename = "fm&dnn")]
    FmDnn,
    #[serde(rename = "deepfm-d")]
    DeepFmD,
    #[serde(rename = "deepfm-ip")]
    DeepFmIp,
    #[serde(rename = "deepfm-op")]
    DeepFmOp,
    #[serde(rename = "deepfm-*p")]
    DeepFmStarP,
}

/// Product function of the PNN family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Product {
    Inner,
    Outer,
    Both,
}

/// How outer products enter the product layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OuterMode {
    /// `vec(f fᵀ)` with `f = Σ_i e_i`; `k²` quadratic neurons.
    #[default]
    Compressed,
    /// `vec(e_i e_jᵀ)` for every field pair; `m(m−1)/2 · k²` quadratic neurons.
    Exact,
}

impl ModelKind {
    pub const ALL: [ModelKind; 14] = [
        ModelKind::Lr,
        ModelKind::Poly2,
        ModelKind::Fm,
        ModelKind::Dnn,
        ModelKind::Fnn,
        ModelKind::Ipnn,
        ModelKind::Opnn,
        ModelKind::PnnStar,
        ModelKind::LrDnn,
        ModelKind::FmDnn,
        ModelKind::DeepFmD,
        ModelKind::DeepFmIp,
        ModelKind::DeepFmOp,
        ModelKind::DeepFmStarP,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Lr => "lr",
            ModelKind::Poly2 => "poly2",
            ModelKind::Fm => "fm",
            ModelKind::Dnn => "dnn",
            ModelKind::Fnn => "fnn",
            ModelKind::Ipnn => "ipnn",
            ModelKind::Opnn => "opnn",
            ModelKind::PnnStar => "pnn*",
            ModelKind::LrDnn => "lr&dnn",
            ModelKind::FmDnn => "fm&dnn",
            ModelKind::DeepFmD => "deepfm-d",
            ModelKind::DeepFmIp => "deepfm-ip",
            ModelKind::DeepFmOp => "deepfm-op",
            ModelKind::DeepFmStarP => "deepfm-*p",
        }
    }

    /// Has the order-1 term `w0 + ⟨w, x⟩`.
    pub fn has_linear(self) -> bool {
        use ModelKind::*;
        matches!(self, Lr | Poly2 | Fm | LrDnn | FmDnn | DeepFmD | DeepFmIp | DeepFmOp | DeepFmStarP)
    }

    /// Has FM pairwise inner-product terms.
    pub fn has_fm(self) -> bool {
        use ModelKind::*;
        matches!(self, Fm | FmDnn | DeepFmD | DeepFmIp | DeepFmOp | DeepFmStarP)
    }

    pub fn has_poly2(self) -> bool {
        self == ModelKind::Poly2
    }

    pub fn has_deep(self) -> bool {
        !matches!(self, ModelKind::Lr | ModelKind::Poly2 | ModelKind::Fm)
    }

    /// The deep component reads the FM latent table directly.
    pub fn shared_embedding(self) -> bool {
        use ModelKind::*;
        matches!(self, DeepFmD | DeepFmIp | DeepFmOp | DeepFmStarP)
    }

    pub fn product(self) -> Option<Product> {
        use ModelKind::*;
        match self {
            Ipnn | DeepFmIp => Some(Product::Inner),
            Opnn | DeepFmOp => Some(Product::Outer),
            PnnStar | DeepFmStarP => Some(Product::Both),
            _ => None,
        }
    }

    /// Width of the embedding rows the deep component consumes, given FM size `k`.
    /// Deep parts without an FM component carry one extra neuron for the order-1 weight.
    pub fn deep_embedding_width(self, k: usize) -> usize {
        if self.shared_embedding() {
            k
        } else {
            k + 1
        }
    }
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.trim().to_ascii_lowercase().replace(['_', ' '], "-");
        let kind = match norm.as_str() {
            "lr" => ModelKind::Lr,
            "poly2" | "poly-2" => ModelKind::Poly2,
            "fm" => ModelKind::Fm,
            "dnn" => ModelKind::Dnn,
            "fnn" => ModelKind::Fnn,
            "ipnn" => ModelKind::Ipnn,
            "opnn" => ModelKind::Opnn,
            "pnn*" | "pnn-star" | "pnnstar" => ModelKind::PnnStar,
            "lr&dnn" | "lr-dnn" | "lrdnn" => ModelKind::LrDnn,
            "fm&dnn" | "fm-dnn" | "fmdnn" => ModelKind::FmDnn,
            "deepfm-d" | "deepfm" | "deepfmd" => ModelKind::DeepFmD,
            "deepfm-ip" => ModelKind::DeepFmIp,
            "deepfm-op" => ModelKind::DeepFmOp,
            "deepfm-*p" | "deepfm-starp" | "deepfm-star-p" => ModelKind::DeepFmStarP,
            _ => return Err(Error::Config(format!("unknown model kind {s:?}"))),
        };
        Ok(kind)
    }
}

fn default_keep_prob() -> f64 {
    1.0
}
fn default_ln_epsilon() -> f64 {
    1e-5
}
fn default_poly2_bits() -> u32 {
    20
}
fn default_init_std() -> f64 {
    0.01
}
fn default_activation() -> Activation {
    Activation::Relu
}

/// Predictor choice plus its architecture hyper-parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub kind: ModelKind,
    /// FM latent size. Deep parts without an FM component use `k + 1`.
    #[serde(default)]
    pub k: usize,
    /// Hidden layer widths, input side first.
    #[serde(default)]
    pub hidden: Vec<usize>,
    #[serde(default = "default_activation")]
    pub activation: Activation,
    /// Dropout keep probability for hidden layer outputs.
    #[serde(default = "default_keep_prob")]
    pub keep_prob: f64,
    #[serde(default)]
    pub outer: OuterMode,
    #[serde(default)]
    pub layer_norm: bool,
    #[serde(default = "default_ln_epsilon")]
    pub ln_epsilon: f64,
    /// Poly-2 pair table holds `2^bits` weights.
    #[serde(default = "default_poly2_bits")]
    pub poly2_table_bits: u32,
    /// Std of the normal init for latent vectors and dense weights.
    #[serde(default = "default_init_std")]
    pub init_std: f64,
}

impl ModelSpec {
    pub fn new(kind: ModelKind) -> Self {
        Self {
            kind,
            k: if kind.has_fm() || kind.has_deep() { 10 } else { 0 },
            hidden: if kind.has_deep() { vec![400, 400, 400] } else { Vec::new() },
            activation: Activation::Relu,
            keep_prob: 1.0,
            outer: OuterMode::Compressed,
            layer_norm: false,
            ln_epsilon: default_ln_epsilon(),
            poly2_table_bits: default_poly2_bits(),
            init_std: default_init_std(),
        }
    }

    pub fn with_k(mut self, k: usize) -> Self {
        self.k = k;
        self
    }

    pub fn with_hidden(mut self, hidden: impl Into<Vec<usize>>) -> Self {
        self.hidden = hidden.into();
        self
    }

    pub fn with_activation(mut self, a: Activation) -> Self {
        self.activation = a;
        self
    }

    pub fn with_keep_prob(mut self, p: f64) -> Self {
        self.keep_prob = p;
        self
    }

    pub fn with_layer_norm(mut self, on: bool) -> Self {
        self.layer_norm = on;
        self
    }

    pub fn with_outer(mut self, mode: OuterMode) -> Self {
        self.outer = mode;
        self
    }

    pub fn with_init_std(mut self, std: f64) -> Self {
        self.init_std = std;
        self
    }

    pub fn with_poly2_bits(mut self, bits: u32) -> Self {
        self.poly2_table_bits = bits;
        self
    }

    pub fn product(&self) -> Option<Product> {
        self.kind.product()
    }

    pub fn shared_embedding(&self) -> bool {
        self.kind.shared_embedding()
    }

    pub fn deep_embedding_width(&self) -> usize {
        self.kind.deep_embedding_width(self.k)
    }

    pub fn validate(&self) -> Result<()> {
        let kind = self.kind;
        let cfg = |msg: String| Err(Error::Config(format!("{kind}: {msg}")));
        if (kind.has_fm() || kind.has_deep()) && self.k == 0 {
            return cfg("embedding size k must be at least 1".into());
        }
        if !(kind.has_fm() || kind.has_deep()) && self.k != 0 {
            return cfg("k is only meaningful for models with embeddings".into());
        }
        if kind.has_deep() {
            if self.hidden.is_empty() {
                return cfg("deep models need at least one hidden layer".into());
            }
            if self.hidden.contains(&0) {
                return cfg("hidden layer widths must be positive".into());
            }
        } else {
            if !self.hidden.is_empty() {
                return cfg("wide models take no hidden layers".into());
            }
            if self.layer_norm {
                return cfg("layer normalization applies to deep models only".into());
            }
            if self.keep_prob != 1.0 {
                return cfg("dropout applies to deep models only".into());
            }
        }
        if !(self.keep_prob > 0.0 && self.keep_prob <= 1.0) {
            return cfg(format!("keep_prob must lie in (0, 1], got {}", self.keep_prob));
        }
        if !(self.ln_epsilon > 0.0) {
            return cfg("ln_epsilon must be positive".into());
        }
        if kind.has_poly2() && !(1..=28).contains(&self.poly2_table_bits) {
            return cfg("poly2_table_bits must lie in 1..=28".into());
        }
        if !(self.init_std >= 0.0 && self.init_std.is_finite()) {
            return cfg("init_std must be finite and non-negative".into());
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_round_trip() {
        for kind in ModelKind::ALL {
            assert_eq!(kind.name().parse::<ModelKind>().unwrap(), kind);
            let json = serde_json::to_string(&kind).unwrap();
            assert_eq!(json, format!("\"{}\"", kind.name()));
        }
        assert!("nope".parse::<ModelKind>().is_err());
    }

    #[test]
    fn embedding_widths() {
        for kind in [ModelKind::DeepFmD, ModelKind::DeepFmIp, ModelKind::DeepFmOp, ModelKind::DeepFmStarP] {
            assert_eq!(kind.deep_embedding_width(10), 10);
        }
        for kind in [ModelKind::Dnn, ModelKind::Fnn, ModelKind::Ipnn, ModelKind::LrDnn, ModelKind::FmDnn] {
            assert_eq!(kind.deep_embedding_width(10), 11);
        }
    }

    #[test]
    fn kind_specific_fields_are_checked() {
        assert!(ModelSpec::new(ModelKind::Lr).validate().is_ok());
        assert!(ModelSpec::new(ModelKind::Lr).with_hidden(vec![4]).validate().is_err());
        assert!(ModelSpec::new(ModelKind::Fm).with_k(0).validate().is_err());
        assert!(ModelSpec::new(ModelKind::Dnn).with_hidden(vec![]).validate().is_err());
        assert!(ModelSpec::new(ModelKind::Dnn).with_keep_prob(0.0).validate().is_err());
        assert!(ModelSpec::new(ModelKind::Fm).with_layer_norm(true).validate().is_err());
        assert!(ModelSpec::new(ModelKind::DeepFmD).validate().is_ok());
    }

    #[test]
    fn spec_json_rejects_unknown_keys() {
        let spec: ModelSpec = serde_json::from_str(r#"{"kind":"deepfm-d","k":4,"hidden":[8]}"#).unwrap();
        assert_eq!(spec.keep_prob, 1.0);
        assert_eq!(spec.activation, Activation::Relu);
        assert!(serde_json::from_str::<ModelSpec>(r#"{"kind":"fm","k":4,"bogus":1}"#).is_err());
    }
}
