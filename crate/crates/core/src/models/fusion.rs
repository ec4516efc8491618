use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::nn::{Activation, DenseGrad, Mlp, MlpCache, MlpSpec};
use crate::error::{Error, Result};

/// Network family. `SpectraOnly` is the plain single-hidden-layer baseline
/// on spectra; `MetaOnly` its metadata counterpart.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Early,
    Joint,
    Late,
    SpectraOnly,
    MetaOnly,
}

impl Variant {
    pub const FUSION: [Variant; 3] = [Variant::Early, Variant::Joint, Variant::Late];
    pub const ALL: [Variant; 5] = [Variant::SpectraOnly, Variant::MetaOnly, Variant::Early, Variant::Joint, Variant::Late];

    /// Display name used in metric tables.
    pub fn display(self) -> &'static str {
        match self {
            Variant::Early => "Early Fusion",
            Variant::Joint => "Joint Fusion",
            Variant::Late => "Late Fusion",
            Variant::SpectraOnly => "Vanilla",
            Variant::MetaOnly => "Metadata Only",
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Variant::Early => "early",
            Variant::Joint => "joint",
            Variant::Late => "late",
            Variant::SpectraOnly => "spectra_only",
            Variant::MetaOnly => "meta_only",
        }
    }

    pub fn parse(s: &str) -> Option<Variant> {
        Variant::ALL.into_iter().find(|v| v.as_str() == s)
    }

    pub fn uses_spectra(self) -> bool {
        self != Variant::MetaOnly
    }

    pub fn uses_meta(self) -> bool {
        self != Variant::SpectraOnly
    }
}

/// Hidden widths of every variant. Dropout applies to head hidden layers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Architecture {
    pub early_hidden: Vec<usize>,
    pub joint_branch_hidden: Vec<usize>,
    pub joint_head_hidden: Vec<usize>,
    pub late_branch_hidden: Vec<usize>,
    pub late_head_hidden: Vec<usize>,
    pub single_hidden: Vec<usize>,
    pub dropout: f64,
}

impl Default for Architecture {
    fn default() -> Self {
        Architecture {
            early_hidden: vec![256, 64],
            joint_branch_hidden: vec![128],
            joint_head_hidden: vec![64],
            late_branch_hidden: vec![128, 32],
            late_head_hidden: vec![8],
            single_hidden: vec![128],
            dropout: 0.3,
        }
    }
}

impl Architecture {
    /// Specs of (spectral branch, metadata branch, head) for a variant.
    pub fn specs(&self, variant: Variant, d_s: usize, d_m: usize) -> Result<(Option<MlpSpec>, Option<MlpSpec>, MlpSpec)> {
        if variant.uses_spectra() && d_s == 0 {
            return Err(Error::Shape(format!("{} needs spectral features", variant.as_str())));
        }
        if variant.uses_meta() && d_m == 0 {
            return Err(Error::Shape(format!("{} needs metadata features", variant.as_str())));
        }
        let p = self.dropout;
        let out = |input, hidden: &[usize], dropout| MlpSpec::stack(input, hidden, dropout, 1, Activation::Sigmoid);
        let specs = match variant {
            Variant::Early => (None, None, out(d_s + d_m, &self.early_hidden, p)),
            Variant::SpectraOnly => (None, None, out(d_s, &self.single_hidden, p)),
            Variant::MetaOnly => (None, None, out(d_m, &self.single_hidden, p)),
            Variant::Joint => {
                let branch = |input| {
                    let (last, hidden) = self.joint_branch_hidden.split_last().expect("non-empty branch");
                    MlpSpec::stack(input, hidden, 0.0, *last, Activation::Relu)
                };
                let width = 2 * self.joint_branch_hidden.last().copied().unwrap_or(0);
                (Some(branch(d_s)), Some(branch(d_m)), out(width, &self.joint_head_hidden, p))
            }
            Variant::Late => (
                Some(out(d_s, &self.late_branch_hidden, 0.0)),
                Some(out(d_m, &self.late_branch_hidden, 0.0)),
                out(2, &self.late_head_hidden, p),
            ),
        };
        for s in [&specs.0, &specs.1].into_iter().flatten().chain([&specs.2]) {
            s.validate()?;
        }
        Ok(specs)
    }

    pub fn validate(&self) -> Result<()> {
        if self.joint_branch_hidden.is_empty() {
            return Err(Error::Config("joint branches need at least one layer".into()));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Config("dropout must lie in [0, 1)".into()));
        }
        for v in Variant::ALL {
            self.specs(v, 1, 1)?;
        }
        Ok(())
    }
}

/// One epoch of the training trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    pub val_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FusionModel {
    pub variant: Variant,
    pub spectral_branch: Option<Mlp>,
    pub meta_branch: Option<Mlp>,
    pub head: Mlp,
    pub trace: Vec<EpochRecord>,
}

/// Gradients in the same layout as the model.
#[derive(Debug, Clone)]
pub struct FusionGrad {
    pub spectral_branch: Option<Vec<DenseGrad>>,
    pub meta_branch: Option<Vec<DenseGrad>>,
    pub head: Vec<DenseGrad>,
}

pub(crate) struct FusionCache {
    spectral: Option<MlpCache>,
    meta: Option<MlpCache>,
    head: MlpCache,
    split: usize,
}

/// Largest f64 below one; probabilities are kept strictly inside (0, 1).
const ONE_BELOW: f64 = 1.0 - f64::EPSILON / 2.0;

impl FusionModel {
    pub fn new(variant: Variant, arch: &Architecture, d_s: usize, d_m: usize, seed: u64) -> Result<Self> {
        let (s, m, h) = arch.specs(variant, d_s, d_m)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let spectral_branch = s.map(|s| Mlp::new(&s, &mut rng)).transpose()?;
        let meta_branch = m.map(|m| Mlp::new(&m, &mut rng)).transpose()?;
        let head = Mlp::new(&h, &mut rng)?;
        Ok(FusionModel { variant, spectral_branch, meta_branch, head, trace: Vec::new() })
    }

    pub fn n_params(&self) -> usize {
        self.parts().iter().map(|m| m.n_params()).sum()
    }

    fn parts(&self) -> Vec<&Mlp> {
        self.spectral_branch.iter().chain(self.meta_branch.iter()).chain([&self.head]).collect()
    }

    /// Head input for feature-major batches `xs` (d_s x n) and `xm` (d_m x n).
    fn head_input(&self, xs: &DMatrix<f64>, xm: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if xs.ncols() != xm.ncols() {
            return Err(Error::Shape(format!("{} spectral vs {} metadata samples", xs.ncols(), xm.ncols())));
        }
        Ok(match self.variant {
            Variant::SpectraOnly => xs.clone(),
            Variant::MetaOnly => xm.clone(),
            Variant::Early => stack_rows(xs, xm),
            Variant::Joint | Variant::Late => {
                let fs = self.spectral_branch.as_ref().expect("branch").forward(xs)?;
                let fm = self.meta_branch.as_ref().expect("branch").forward(xm)?;
                stack_rows(&fs, &fm)
            }
        })
    }

    /// Probabilities for feature-major batches; strictly inside (0, 1).
    pub fn predict_columns(&self, xs: &DMatrix<f64>, xm: &DMatrix<f64>) -> Result<Vec<f64>> {
        let input = self.head_input(xs, xm)?;
        let out = self.head.forward(&input)?;
        Ok(out.iter().map(|p| p.clamp(f64::MIN_POSITIVE, ONE_BELOW)).collect())
    }

    /// Probabilities for sample-major matrices (n x d_s, n x d_m).
    pub fn predict(&self, xs: &DMatrix<f64>, xm: &DMatrix<f64>) -> Result<Vec<f64>> {
        self.predict_columns(&xs.transpose(), &xm.transpose())
    }

    pub(crate) fn forward_cached(
        &self,
        xs: &DMatrix<f64>,
        xm: &DMatrix<f64>,
        mut rng: Option<&mut ChaCha8Rng>,
    ) -> Result<(Vec<f64>, FusionCache)> {
        if xs.ncols() != xm.ncols() {
            return Err(Error::Shape(format!("{} spectral vs {} metadata samples", xs.ncols(), xm.ncols())));
        }
        let (input, spectral, meta, split) = match self.variant {
            Variant::SpectraOnly => (xs.clone(), None, None, xs.nrows()),
            Variant::MetaOnly => (xm.clone(), None, None, 0),
            Variant::Early => (stack_rows(xs, xm), None, None, xs.nrows()),
            Variant::Joint | Variant::Late => {
                let (fs, cs) = self.spectral_branch.as_ref().expect("branch").forward_cached(xs, rng.as_deref_mut())?;
                let (fm, cm) = self.meta_branch.as_ref().expect("branch").forward_cached(xm, rng.as_deref_mut())?;
                (stack_rows(&fs, &fm), Some(cs), Some(cm), fs.nrows())
            }
        };
        let (out, head) = self.head.forward_cached(&input, rng)?;
        Ok((out.iter().copied().collect(), FusionCache { spectral, meta, head, split }))
    }

    /// Backpropagates `d_logit` (gradient of the loss with respect to the
    /// output pre-activation, one entry per sample). Branch gradients are
    /// skipped when `frozen_branches` is set.
    pub(crate) fn backward(&self, cache: &FusionCache, d_logit: &[f64], frozen_branches: bool) -> FusionGrad {
        let g = DMatrix::from_row_slice(1, d_logit.len(), d_logit);
        let (head, d_input) = self.head.backward(&cache.head, g, true);
        let mut grad = FusionGrad { spectral_branch: None, meta_branch: None, head };
        if frozen_branches {
            return grad;
        }
        if let (Some(sb), Some(mb), Some(cs), Some(cm)) =
            (&self.spectral_branch, &self.meta_branch, &cache.spectral, &cache.meta)
        {
            let rows = d_input.nrows();
            let ds = d_input.rows(0, cache.split).into_owned();
            let dm = d_input.rows(cache.split, rows - cache.split).into_owned();
            grad.spectral_branch = Some(sb.backward(cs, ds, false).0);
            grad.meta_branch = Some(mb.backward(cm, dm, false).0);
        }
        grad
    }

    /// Mutable views of every parameter tensor: branches first, then head;
    /// weight before bias within a layer.
    pub fn parameters_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out = Vec::new();
        let FusionModel { spectral_branch, meta_branch, head, .. } = self;
        for mlp in spectral_branch.iter_mut().chain(meta_branch.iter_mut()).chain([head]) {
            for layer in &mut mlp.layers {
                out.push(layer.weight.as_mut_slice());
                out.push(layer.bias.as_mut_slice());
            }
        }
        out
    }

    /// Head parameters only, in the order of [`FusionModel::parameters_mut`].
    pub fn head_parameters_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out = Vec::new();
        for layer in &mut self.head.layers {
            out.push(layer.weight.as_mut_slice());
            out.push(layer.bias.as_mut_slice());
        }
        out
    }
}

impl FusionGrad {
    /// Gradient slices in the order of [`FusionModel::parameters_mut`].
    pub fn slices(&self) -> Vec<&[f64]> {
        let mut out = Vec::new();
        for grads in self.spectral_branch.iter().chain(self.meta_branch.iter()).chain([&self.head]) {
            for g in grads {
                out.push(g.weight.as_slice());
                out.push(g.bias.as_slice());
            }
        }
        out
    }
}

/// Concatenates feature-major blocks: `[a; b]`.
pub(crate) fn stack_rows(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(a.nrows() + b.nrows(), a.ncols());
    out.rows_mut(0, a.nrows()).copy_from(a);
    out.rows_mut(a.nrows(), b.nrows()).copy_from(b);
    out
}

/// Early fusion input: `[X_s | X_m]` for sample-major matrices.
pub fn build_early_fusion(xs: &DMatrix<f64>, xm: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if xs.nrows() != xm.nrows() {
        return Err(Error::Shape(format!("{} spectral rows vs {} metadata rows", xs.nrows(), xm.nrows())));
    }
    let mut out = DMatrix::zeros(xs.nrows(), xs.ncols() + xm.ncols());
    out.columns_mut(0, xs.ncols()).copy_from(xs);
    out.columns_mut(xs.ncols(), xm.ncols()).copy_from(xm);
    Ok(out)
}
