//! The two-branch embedding network and its joint objective.
//!
//! The visual branch is one fully connected layer with ReLU; the semantic
//! branch is two, with hidden width `floor((d_s + embed_dim) / 2)`. A linear
//! classifier over every class in the attribute table sits on top of the
//! visual embedding. The objective is
//!
//! ```text
//! mean_i ‖φ(x_i) − ψ(z_{y_i})‖² + λ · CE(Wᵀφ(x_i) + c, y_i) + η · Σ‖θ‖²
//! ```
//!
//! where the L2 sum runs over every weight and bias of both branches and the
//! classifier.

use alloc::format;
use alloc::vec::Vec;

use rand::distr::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::numerics::{
    affine, affine_relu_backward, affine_relu_forward, matmul_nt, matmul_tn,
    softmax_cross_entropy, AdamState, AffineReluCache, Matrix,
};
use crate::rng::{derive_seed, stream};

pub const DEFAULT_LR: f64 = 1e-4;
pub const DEFAULT_EMBED_DIM: usize = 1024;
pub const DEFAULT_EPOCHS: usize = 50;
pub const DEFAULT_ROUNDS: usize = 10;
pub const DEFAULT_M0: usize = 40;
pub const DEFAULT_BATCH_SIZE: usize = 64;

/// Training and calibration hyperparameters.
#[derive(Debug, Clone, PartialEq)]
pub struct HyperParams {
    /// Weight of the classification term.
    pub lambda: f64,
    /// Weight of the L2 penalty.
    pub eta: f64,
    pub lr: f64,
    pub embed_dim: usize,
    /// Outer alternating iterations per training run.
    pub epochs: usize,
    /// Pseudo-labelling calibration rounds.
    pub rounds: usize,
    /// Per-class selection budget of the first calibration round.
    pub m0: usize,
    pub batch_size: usize,
    pub seed: u64,
}

impl HyperParams {
    /// `lambda` and `eta` have no sensible universal default; everything else
    /// takes the standard values.
    pub fn new(lambda: f64, eta: f64) -> Self {
        Self {
            lambda,
            eta,
            lr: DEFAULT_LR,
            embed_dim: DEFAULT_EMBED_DIM,
            epochs: DEFAULT_EPOCHS,
            rounds: DEFAULT_ROUNDS,
            m0: DEFAULT_M0,
            batch_size: DEFAULT_BATCH_SIZE,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::Config(msg.into()));
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return bad("lambda must be finite and >= 0");
        }
        if !(self.eta >= 0.0 && self.eta.is_finite()) {
            return bad("eta must be finite and >= 0");
        }
        if !(self.lr >= 0.0 && self.lr.is_finite()) {
            return bad("learning rate must be finite and >= 0");
        }
        if self.embed_dim == 0 || self.m0 == 0 || self.batch_size == 0 {
            return bad("embed_dim, m0 and batch_size must be >= 1");
        }
        Ok(())
    }
}

/// Hidden width of the semantic branch.
pub fn semantic_hidden_width(d_s: usize, embed_dim: usize) -> usize {
    (d_s + embed_dim) / 2
}

/// Weight and bias of a fully connected layer (`y = x·w + b`).
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub w: Matrix,
    pub b: Matrix,
}

impl Dense {
    fn glorot(fan_in: usize, fan_out: usize, rng: &mut ChaCha8Rng) -> Self {
        let a = libm::sqrt(6.0 / (fan_in + fan_out) as f64);
        let dist = Uniform::new_inclusive(-a, a).expect("finite bound");
        let data = (0..fan_in * fan_out).map(|_| dist.sample(rng)).collect();
        Self {
            w: Matrix::from_vec(fan_in, fan_out, data).expect("sized buffer"),
            b: Matrix::zeros(1, fan_out),
        }
    }

    pub fn zeros(fan_in: usize, fan_out: usize) -> Self {
        Self {
            w: Matrix::zeros(fan_in, fan_out),
            b: Matrix::zeros(1, fan_out),
        }
    }
}

/// Identifies one parameter matrix. Order and names are stable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ParamId {
    VisualW,
    VisualB,
    SemanticW1,
    SemanticB1,
    SemanticW2,
    SemanticB2,
    ClassifierW,
    ClassifierB,
}

impl ParamId {
    pub const ALL: [ParamId; 8] = [
        ParamId::VisualW,
        ParamId::VisualB,
        ParamId::SemanticW1,
        ParamId::SemanticB1,
        ParamId::SemanticW2,
        ParamId::SemanticB2,
        ParamId::ClassifierW,
        ParamId::ClassifierB,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ParamId::VisualW => "visual.w",
            ParamId::VisualB => "visual.b",
            ParamId::SemanticW1 => "semantic.w1",
            ParamId::SemanticB1 => "semantic.b1",
            ParamId::SemanticW2 => "semantic.w2",
            ParamId::SemanticB2 => "semantic.b2",
            ParamId::ClassifierW => "classifier.w",
            ParamId::ClassifierB => "classifier.b",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|p| p.name() == name)
    }

    pub fn branch(self) -> Branch {
        match self {
            ParamId::SemanticW1 | ParamId::SemanticB1 | ParamId::SemanticW2 | ParamId::SemanticB2 => {
                Branch::Semantic
            }
            _ => Branch::Visual,
        }
    }

    fn slot(self) -> usize {
        self as usize
    }
}

/// Which half of the alternating scheme a gradient is taken for.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branch {
    /// Visual branch and classifier; the semantic branch is held fixed.
    Visual,
    /// Semantic branch; the visual branch and classifier are held fixed.
    Semantic,
}

impl Branch {
    pub fn params(self) -> &'static [ParamId] {
        match self {
            Branch::Visual => &[
                ParamId::VisualW,
                ParamId::VisualB,
                ParamId::ClassifierW,
                ParamId::ClassifierB,
            ],
            Branch::Semantic => &[
                ParamId::SemanticW1,
                ParamId::SemanticB1,
                ParamId::SemanticW2,
                ParamId::SemanticB2,
            ],
        }
    }
}

/// All learnable parameters plus one Adam state per parameter matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    visual: Dense,
    semantic_hidden: Dense,
    semantic_out: Dense,
    classifier: Dense,
    adam: [AdamState; 8],
}

impl ModelParams {
    /// Assembles parameters, checking every shape against the architecture.
    /// Adam states start zeroed.
    pub fn from_layers(
        visual: Dense,
        semantic_hidden: Dense,
        semantic_out: Dense,
        classifier: Dense,
    ) -> Result<Self> {
        let d_v = visual.w.rows();
        let embed = visual.w.cols();
        let d_s = semantic_hidden.w.rows();
        let hidden = semantic_hidden_width(d_s, embed);
        let classes = classifier.w.cols();
        let expect = [
            (&visual.w, (d_v, embed)),
            (&visual.b, (1, embed)),
            (&semantic_hidden.w, (d_s, hidden)),
            (&semantic_hidden.b, (1, hidden)),
            (&semantic_out.w, (hidden, embed)),
            (&semantic_out.b, (1, embed)),
            (&classifier.w, (embed, classes)),
            (&classifier.b, (1, classes)),
        ];
        for (id, (m, shape)) in ParamId::ALL.iter().zip(expect) {
            if m.shape() != shape {
                return Err(Error::Config(format!(
                    "{} has shape {}x{}, expected {}x{}",
                    id.name(),
                    m.rows(),
                    m.cols(),
                    shape.0,
                    shape.1
                )));
            }
        }
        let adam = [
            AdamState::for_param(&visual.w),
            AdamState::for_param(&visual.b),
            AdamState::for_param(&semantic_hidden.w),
            AdamState::for_param(&semantic_hidden.b),
            AdamState::for_param(&semantic_out.w),
            AdamState::for_param(&semantic_out.b),
            AdamState::for_param(&classifier.w),
            AdamState::for_param(&classifier.b),
        ];
        Ok(Self {
            visual,
            semantic_hidden,
            semantic_out,
            classifier,
            adam,
        })
    }

    pub fn visual_dim(&self) -> usize {
        self.visual.w.rows()
    }

    pub fn semantic_dim(&self) -> usize {
        self.semantic_hidden.w.rows()
    }

    pub fn hidden_dim(&self) -> usize {
        self.semantic_hidden.w.cols()
    }

    pub fn embed_dim(&self) -> usize {
        self.visual.w.cols()
    }

    pub fn num_classes(&self) -> usize {
        self.classifier.w.cols()
    }

    pub fn param(&self, id: ParamId) -> &Matrix {
        match id {
            ParamId::VisualW => &self.visual.w,
            ParamId::VisualB => &self.visual.b,
            ParamId::SemanticW1 => &self.semantic_hidden.w,
            ParamId::SemanticB1 => &self.semantic_hidden.b,
            ParamId::SemanticW2 => &self.semantic_out.w,
            ParamId::SemanticB2 => &self.semantic_out.b,
            ParamId::ClassifierW => &self.classifier.w,
            ParamId::ClassifierB => &self.classifier.b,
        }
    }

    /// Replaces one parameter matrix. The shape must not change.
    pub fn set_param(&mut self, id: ParamId, value: Matrix) -> Result<()> {
        let slot = self.param_mut(id);
        if slot.shape() != value.shape() {
            return Err(Error::shape("set_param", slot.shape(), value.shape()));
        }
        *slot = value;
        Ok(())
    }

    fn param_mut(&mut self, id: ParamId) -> &mut Matrix {
        self.parts_mut(id).0
    }

    fn parts_mut(&mut self, id: ParamId) -> (&mut Matrix, &mut AdamState) {
        let Self {
            visual,
            semantic_hidden,
            semantic_out,
            classifier,
            adam,
        } = self;
        let param = match id {
            ParamId::VisualW => &mut visual.w,
            ParamId::VisualB => &mut visual.b,
            ParamId::SemanticW1 => &mut semantic_hidden.w,
            ParamId::SemanticB1 => &mut semantic_hidden.b,
            ParamId::SemanticW2 => &mut semantic_out.w,
            ParamId::SemanticB2 => &mut semantic_out.b,
            ParamId::ClassifierW => &mut classifier.w,
            ParamId::ClassifierB => &mut classifier.b,
        };
        (param, &mut adam[id.slot()])
    }

    pub fn adam(&self, id: ParamId) -> &AdamState {
        &self.adam[id.slot()]
    }

    /// Replaces one Adam state. Moment shapes must match the parameter.
    pub fn set_adam(&mut self, id: ParamId, state: AdamState) -> Result<()> {
        let shape = self.param(id).shape();
        for m in [&state.m, &state.v] {
            if m.shape() != shape {
                return Err(Error::shape("set_adam", shape, m.shape()));
            }
        }
        self.adam[id.slot()] = state;
        Ok(())
    }

    pub fn reset_adam(&mut self) {
        for s in &mut self.adam {
            s.reset();
        }
    }

    /// Applies one Adam step to `id` using its own moment state.
    pub fn adam_update(&mut self, id: ParamId, grad: &Matrix, lr: f64) -> Result<()> {
        let (param, state) = self.parts_mut(id);
        crate::numerics::adam_step(param, grad, state, lr)
    }

    /// Sum of squared entries over every parameter matrix.
    pub fn l2(&self) -> f64 {
        ParamId::ALL.iter().map(|&id| self.param(id).sq_norm()).sum()
    }

    pub fn is_finite(&self) -> bool {
        ParamId::ALL.iter().all(|&id| self.param(id).is_finite())
    }
}

/// Glorot-uniform weights, zero biases, zeroed Adam state.
pub fn init_model(
    d_v: usize,
    d_s: usize,
    classes: usize,
    hp: &HyperParams,
    seed: u64,
) -> Result<ModelParams> {
    if d_v == 0 || d_s == 0 || classes == 0 || hp.embed_dim == 0 {
        return Err(Error::Config(
            "visual, semantic, class and embedding dimensions must be >= 1".into(),
        ));
    }
    let embed = hp.embed_dim;
    let hidden = semantic_hidden_width(d_s, embed);
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, stream::INIT, 0, 0));
    ModelParams::from_layers(
        Dense::glorot(d_v, embed, &mut rng),
        Dense::glorot(d_s, hidden, &mut rng),
        Dense::glorot(hidden, embed, &mut rng),
        Dense::glorot(embed, classes, &mut rng),
    )
}

/// `φ(x) = ReLU(x·w + b)`.
pub fn embed_visual(params: &ModelParams, x: &Matrix) -> Result<Matrix> {
    let mut out = affine(x, &params.visual.w, &params.visual.b)?;
    crate::numerics::relu_in_place(&mut out);
    Ok(out)
}

/// `ψ(z) = ReLU(ReLU(z·w1 + b1)·w2 + b2)`.
pub fn embed_semantic(params: &ModelParams, z: &Matrix) -> Result<Matrix> {
    let mut h = affine(z, &params.semantic_hidden.w, &params.semantic_hidden.b)?;
    crate::numerics::relu_in_place(&mut h);
    let mut out = affine(&h, &params.semantic_out.w, &params.semantic_out.b)?;
    crate::numerics::relu_in_place(&mut out);
    Ok(out)
}

/// A minibatch: visual features, one class ID per row, and the class-level
/// attribute table the IDs index into.
#[derive(Debug, Clone, Copy)]
pub struct Batch<'a> {
    pub x: &'a Matrix,
    pub labels: &'a [usize],
    pub attributes: &'a Matrix,
}

/// The terms of the joint objective.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LossBreakdown {
    pub regression: f64,
    pub classification: f64,
    pub l2: f64,
    pub total: f64,
}

impl LossBreakdown {
    pub fn compose(regression: f64, classification: f64, l2: f64, hp: &HyperParams) -> Self {
        Self {
            regression,
            classification,
            l2,
            total: regression + hp.lambda * classification + hp.eta * l2,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.regression.is_finite()
            && self.classification.is_finite()
            && self.l2.is_finite()
            && self.total.is_finite()
    }
}

/// Gradients for the parameters of one branch.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    branch: Branch,
    grads: Vec<(ParamId, Matrix)>,
}

impl Gradients {
    pub fn branch(&self) -> Branch {
        self.branch
    }

    /// `None` for parameters outside the requested branch.
    pub fn get(&self, id: ParamId) -> Option<&Matrix> {
        self.grads.iter().find(|(p, _)| *p == id).map(|(_, g)| g)
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamId, &Matrix)> {
        self.grads.iter().map(|(p, g)| (*p, g))
    }
}

struct Forward {
    phi: Matrix,
    visual_cache: AffineReluCache,
    /// Distinct classes in the batch, ascending; row k of `psi` embeds `classes[k]`.
    classes: Vec<usize>,
    /// Row of `psi` for each sample.
    slot_of: Vec<usize>,
    psi: Matrix,
    hidden_cache: AffineReluCache,
    out_cache: AffineReluCache,
    dlogits: Matrix,
    loss: LossBreakdown,
}

fn check_batch(params: &ModelParams, batch: &Batch<'_>) -> Result<()> {
    let n = batch.x.rows();
    if n == 0 {
        return Err(Error::Config("empty batch".into()));
    }
    if batch.labels.len() != n {
        return Err(Error::shape("batch labels", batch.x.shape(), (batch.labels.len(), 1)));
    }
    if batch.attributes.cols() != params.semantic_dim() {
        return Err(Error::shape(
            "attribute table",
            batch.attributes.shape(),
            params.param(ParamId::SemanticW1).shape(),
        ));
    }
    let bound = params.num_classes().min(batch.attributes.rows());
    if let Some(&bad) = batch.labels.iter().find(|&&l| l >= bound) {
        return Err(Error::Index {
            what: "class",
            index: bad,
            bound,
        });
    }
    Ok(())
}

fn forward(params: &ModelParams, batch: &Batch<'_>, hp: &HyperParams) -> Result<Forward> {
    check_batch(params, batch)?;
    let n = batch.x.rows();
    let (phi, visual_cache) = affine_relu_forward(batch.x, &params.visual.w, &params.visual.b)?;

    let mut classes = batch.labels.to_vec();
    classes.sort_unstable();
    classes.dedup();
    let slot_of: Vec<usize> = batch
        .labels
        .iter()
        .map(|l| classes.binary_search(l).expect("label present"))
        .collect();
    let z = batch.attributes.select_rows(&classes)?;
    let (hidden, hidden_cache) =
        affine_relu_forward(&z, &params.semantic_hidden.w, &params.semantic_hidden.b)?;
    let (psi, out_cache) =
        affine_relu_forward(&hidden, &params.semantic_out.w, &params.semantic_out.b)?;

    let mut regression = 0.0;
    for (i, &k) in slot_of.iter().enumerate() {
        regression += crate::numerics::sq_dist(phi.row(i), psi.row(k));
    }
    regression /= n as f64;

    let logits = affine(&phi, &params.classifier.w, &params.classifier.b)?;
    let (classification, dlogits) = softmax_cross_entropy(&logits, batch.labels)?;

    Ok(Forward {
        phi,
        visual_cache,
        classes,
        slot_of,
        psi,
        hidden_cache,
        out_cache,
        dlogits,
        loss: LossBreakdown::compose(regression, classification, params.l2(), hp),
    })
}

/// Evaluates the objective on a batch without computing gradients.
pub fn batch_loss(params: &ModelParams, batch: &Batch<'_>, hp: &HyperParams) -> Result<LossBreakdown> {
    Ok(forward(params, batch, hp)?.loss)
}

/// Evaluates the objective and the gradients of one branch's parameters with
/// the other branch held fixed.
pub fn forward_loss(
    params: &ModelParams,
    batch: &Batch<'_>,
    hp: &HyperParams,
    branch: Branch,
) -> Result<(LossBreakdown, Gradients)> {
    let fwd = forward(params, batch, hp)?;
    let n = batch.x.rows() as f64;
    let two_eta = 2.0 * hp.eta;
    let mut grads = Vec::with_capacity(4);
    let mut push = |id: ParamId, mut g: Matrix| -> Result<()> {
        g.axpy(two_eta, params.param(id))?;
        grads.push((id, g));
        Ok(())
    };

    match branch {
        Branch::Visual => {
            // d regression / d φ_i = 2(φ_i − ψ_{y_i}) / n
            let mut dphi = fwd.phi.clone();
            for (i, &k) in fwd.slot_of.iter().enumerate() {
                for (d, p) in dphi.row_mut(i).iter_mut().zip(fwd.psi.row(k)) {
                    *d = 2.0 * (*d - p) / n;
                }
            }
            let mut dlogits = fwd.dlogits;
            dlogits.scale(hp.lambda);
            dphi.axpy(1.0, &matmul_nt(&dlogits, &params.classifier.w)?)?;
            let visual = affine_relu_backward(&dphi, &fwd.visual_cache)?;
            push(ParamId::VisualW, visual.dw)?;
            push(ParamId::VisualB, visual.db)?;
            push(ParamId::ClassifierW, matmul_tn(&fwd.phi, &dlogits)?)?;
            push(ParamId::ClassifierB, dlogits.col_sums())?;
        }
        Branch::Semantic => {
            let mut dpsi = Matrix::zeros(fwd.classes.len(), fwd.psi.cols());
            for (i, &k) in fwd.slot_of.iter().enumerate() {
                let (phi_i, psi_k) = (fwd.phi.row(i), fwd.psi.row(k));
                for ((d, f), p) in dpsi.row_mut(k).iter_mut().zip(phi_i).zip(psi_k) {
                    *d -= 2.0 * (f - p) / n;
                }
            }
            let out = affine_relu_backward(&dpsi, &fwd.out_cache)?;
            let hidden = affine_relu_backward(&out.dx, &fwd.hidden_cache)?;
            push(ParamId::SemanticW1, hidden.dw)?;
            push(ParamId::SemanticB1, hidden.db)?;
            push(ParamId::SemanticW2, out.dw)?;
            push(ParamId::SemanticB2, out.db)?;
        }
    }
    Ok((fwd.loss, Gradients { branch, grads }))
}

/// Comparison of analytic gradients against central differences.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct GradCheck {
    /// Largest relative error over the compared entries.
    pub max_rel_error: f64,
    pub compared: usize,
    /// Entries left out because a `±h` step flips at least one ReLU.
    pub skipped: usize,
}

/// On/off state of every ReLU unit in the forward pass.
fn activation_pattern(params: &ModelParams, batch: &Batch<'_>, hp: &HyperParams) -> Result<Vec<bool>> {
    let fwd = forward(params, batch, hp)?;
    Ok([&fwd.visual_cache, &fwd.hidden_cache, &fwd.out_cache]
        .iter()
        .flat_map(|c| c.pre_activation().as_slice().iter().map(|&v| v > 0.0))
        .collect())
}

/// Checks the gradients [`forward_loss`] returns for `branch` against
/// [`finite_diff_grad`](crate::numerics::finite_diff_grad) of the total
/// objective, skipping entries whose perturbation crosses a ReLU kink.
/// Relative errors use `floor` as the smallest denominator.
pub fn check_gradients(
    params: &ModelParams,
    batch: &Batch<'_>,
    hp: &HyperParams,
    branch: Branch,
    h: f64,
    floor: f64,
) -> Result<GradCheck> {
    let (_, grads) = forward_loss(params, batch, hp, branch)?;
    let mut report = GradCheck::default();
    let mut probe = params.clone();
    for (id, analytic) in grads.iter() {
        let base = params.param(id).clone();
        let numeric = crate::numerics::finite_diff_grad(
            |m| {
                probe.set_param(id, m.clone()).expect("same shape");
                batch_loss(&probe, batch, hp).map_or(f64::NAN, |l| l.total)
            },
            &base,
            h,
        )?;
        let mut shifted = base.clone();
        for i in 0..base.as_slice().len() {
            let orig = base.as_slice()[i];
            shifted.as_mut_slice()[i] = orig + h;
            probe.set_param(id, shifted.clone())?;
            let up = activation_pattern(&probe, batch, hp)?;
            shifted.as_mut_slice()[i] = orig - h;
            probe.set_param(id, shifted.clone())?;
            let down = activation_pattern(&probe, batch, hp)?;
            shifted.as_mut_slice()[i] = orig;
            if up != down {
                report.skipped += 1;
                continue;
            }
            let err = crate::numerics::relative_error(
                analytic.as_slice()[i],
                numeric.as_slice()[i],
                floor,
            );
            report.max_rel_error = report.max_rel_error.max(err);
            report.compared += 1;
        }
        probe.set_param(id, base)?;
    }
    Ok(report)
}
