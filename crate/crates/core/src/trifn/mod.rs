//! Tri-relationship fake news detector.
//!
//! News representations `D` are learned by a nonnegative factorization of
//! the content matrix (`X ≈ D Vᵀ`) coupled with a factorization of the user
//! graph (`A ≈ U T Uᵀ`) and two weak-supervision constraints:
//!
//! * spreading: a user's latent vector is pulled towards the news they spread,
//!   strongly when a low-credibility user spreads fake news or a credible user
//!   spreads real news;
//! * bias: the mean representation of a publisher's news predicts the
//!   publisher's partisan bias.
//!
//! A least-squares readout `p` on gold labels turns `D` into predictions.
//! The full objective is
//!
//! ```text
//! ‖X − D Vᵀ‖² + α‖A − U T Uᵀ‖² + β Σ_{W_ij = 1} w(y_j, c_i) ‖U_i − D_j‖²
//!   + γ‖P̄ D q − o‖² + η Σ_{j ∈ gold} (D_j p − y_j)² + λ Σ ‖factor‖²
//! ```
//!
//! Every block subproblem is quadratic, so block coordinate descent with a
//! monotone line search never increases it.

mod io;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use ndarray::{Array1, Array2, ArrayView1, Axis, Zip};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{InteractionNetworks, Label};
use crate::error::{Error, Result};

pub use io::{read_model, write_model, MAGIC as TRIFN_MAGIC};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TriFnHyper {
    pub d: usize,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub eta: f64,
    pub lambda: f64,
    pub max_iters: usize,
    pub tol: f64,
    pub seed: u64,
}

impl Default for TriFnHyper {
    fn default() -> Self {
        TriFnHyper {
            d: 16,
            alpha: 1.0,
            beta: 1.0,
            gamma: 1.0,
            eta: 10.0,
            lambda: 0.01,
            max_iters: 300,
            tol: 1e-5,
            seed: 0,
        }
    }
}

impl TriFnHyper {
    pub fn validate(&self) -> Result<()> {
        let weights = [self.alpha, self.beta, self.gamma, self.eta, self.lambda];
        if self.d == 0 {
            return Err(Error::InvalidArgument("latent dimension must be >= 1".into()));
        }
        if weights.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
            return Err(Error::InvalidArgument("term weights must be finite and >= 0".into()));
        }
        if !(self.tol > 0.0) {
            return Err(Error::InvalidArgument("tol must be > 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TriFnModel {
    /// news x d
    pub news_factors: Array2<f64>,
    /// term x d
    pub term_factors: Array2<f64>,
    /// user x d
    pub user_factors: Array2<f64>,
    /// d x d user-correlation core
    pub user_core: Array2<f64>,
    /// bias-prediction weights
    pub bias_weights: Array1<f64>,
    /// classifier weights
    pub class_weights: Array1<f64>,
    pub hyper: TriFnHyper,
}

/// `w(y, c) = y (1 − c) + (1 − y) c`.
pub fn spreading_weight(y: f64, c: f64) -> Result<f64> {
    if !(y == 0.0 || y == 1.0) {
        return Err(Error::InvalidArgument(format!("label must be 0 or 1, got {y}")));
    }
    if !(0.0..=1.0).contains(&c) {
        return Err(Error::InvalidArgument(format!("credibility must be in [0, 1], got {c}")));
    }
    Ok(y * (1.0 - c) + (1.0 - y) * c)
}

/// Supervision available to the factorization: gold labels (some news) and
/// weak `p_fake` values (possibly all news). Gold takes precedence.
#[derive(Debug, Clone, Copy)]
pub struct Supervision<'a> {
    pub gold: &'a [Option<Label>],
    pub weak: &'a [Option<f64>],
}

impl Supervision<'_> {
    /// Label used by the spreading constraint: gold, else rounded weak label
    /// (exact 0.5 rounds to real).
    fn spreading_label(&self, j: usize) -> Option<f64> {
        match (self.gold[j], self.weak.get(j).copied().flatten()) {
            (Some(l), _) => Some(l.as_f64()),
            (None, Some(p)) => Some(if p > 0.5 { 1.0 } else { 0.0 }),
            (None, None) => None,
        }
    }
}

fn frob2(m: &Array2<f64>) -> f64 {
    m.iter().map(|v| v * v).sum()
}

fn inner(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
    Zip::from(a).and(b).fold(0.0, |acc, x, y| acc + x * y)
}

/// Fixed data of one fit: spreading pairs with their weights and gold rows.
struct Problem<'a> {
    nets: &'a InteractionNetworks,
    hyper: TriFnHyper,
    pairs: Vec<(usize, usize, f64)>,
    gold_rows: Vec<usize>,
    gold_targets: Array1<f64>,
    nnz_a: f64,
}

impl<'a> Problem<'a> {
    fn new(nets: &'a InteractionNetworks, sup: Supervision<'_>, hyper: TriFnHyper) -> Result<Self> {
        let n = nets.n_news();
        if sup.gold.len() != n || (!sup.weak.is_empty() && sup.weak.len() != n) {
            return Err(Error::ShapeMismatch(format!(
                "supervision covers {} gold / {} weak entries for {n} news",
                sup.gold.len(),
                sup.weak.len()
            )));
        }
        let mut pairs = Vec::new();
        for (i, j) in nets.spreading.iter() {
            if let Some(y) = sup.spreading_label(j) {
                let w = spreading_weight(y, nets.credibility[i])?;
                if w > 0.0 {
                    pairs.push((i, j, w));
                }
            }
        }
        let gold_rows: Vec<usize> = (0..n).filter(|&j| sup.gold[j].is_some()).collect();
        let gold_targets = gold_rows
            .iter()
            .map(|&j| sup.gold[j].unwrap().as_f64())
            .collect();
        Ok(Problem {
            nets,
            hyper,
            pairs,
            gold_rows,
            gold_targets,
            nnz_a: nets.adjacency.nnz() as f64,
        })
    }

    fn check_shapes(&self, m: &TriFnModel) -> Result<()> {
        let d = m.news_factors.ncols();
        let ok = m.news_factors.nrows() == self.nets.n_news()
            && m.term_factors.dim() == (self.nets.n_terms(), d)
            && m.user_factors.dim() == (self.nets.n_users(), d)
            && m.user_core.dim() == (d, d)
            && m.bias_weights.len() == d
            && m.class_weights.len() == d;
        if ok {
            Ok(())
        } else {
            Err(Error::ShapeMismatch("model factors do not match the networks".into()))
        }
    }

    fn spreading_term(&self, u: &Array2<f64>, d: &Array2<f64>) -> f64 {
        self.pairs
            .iter()
            .map(|&(i, j, w)| {
                let diff = &u.row(i) - &d.row(j);
                w * diff.dot(&diff)
            })
            .sum()
    }

    fn bias_residual(&self, d: &Array2<f64>, q: &Array1<f64>) -> Array1<f64> {
        self.nets.publisher_means(d).dot(q) - &self.nets.bias
    }

    fn class_residual(&self, d: &Array2<f64>, p: &Array1<f64>) -> Array1<f64> {
        let dg = d.select(Axis(0), &self.gold_rows);
        dg.dot(p) - &self.gold_targets
    }

    /// `α (‖A − U T Uᵀ‖² − ‖A‖²)` given `M = Uᵀ A U` and `G = Uᵀ U`.
    fn graph_part(&self, m: &Array2<f64>, g: &Array2<f64>, t: &Array2<f64>) -> f64 {
        let gtg = g.dot(t).dot(g);
        self.hyper.alpha * (-2.0 * inner(m, t) + inner(&gtg, t))
    }

    fn objective(&self, m: &TriFnModel) -> f64 {
        let h = &self.hyper;
        let x = &self.nets.content;
        let recon = frob2(&(x - &m.news_factors.dot(&m.term_factors.t())));
        let u = &m.user_factors;
        let au = self.nets.adjacency.dot(u);
        let graph = if h.alpha > 0.0 {
            h.alpha * self.nnz_a + self.graph_part(&u.t().dot(&au), &u.t().dot(u), &m.user_core)
        } else {
            0.0
        };
        let spread = if h.beta > 0.0 {
            h.beta * self.spreading_term(u, &m.news_factors)
        } else {
            0.0
        };
        let bias = if h.gamma > 0.0 {
            let r = self.bias_residual(&m.news_factors, &m.bias_weights);
            h.gamma * r.dot(&r)
        } else {
            0.0
        };
        let class = if h.eta > 0.0 {
            let r = self.class_residual(&m.news_factors, &m.class_weights);
            h.eta * r.dot(&r)
        } else {
            0.0
        };
        let reg = h.lambda
            * (frob2(&m.news_factors)
                + frob2(&m.term_factors)
                + frob2(u)
                + frob2(&m.user_core)
                + m.bias_weights.dot(&m.bias_weights)
                + m.class_weights.dot(&m.class_weights));
        recon + graph + spread + bias + class + reg
    }

    // ---- D block ----

    fn d_block_value(&self, m: &TriFnModel, d: &Array2<f64>, xv: &Array2<f64>, vtv: &Array2<f64>) -> f64 {
        let h = &self.hyper;
        let mut f = -2.0 * inner(d, xv) + inner(&d.t().dot(d), vtv) + h.lambda * frob2(d);
        if h.beta > 0.0 {
            f += h.beta * self.spreading_term(&m.user_factors, d);
        }
        if h.gamma > 0.0 {
            let r = self.bias_residual(d, &m.bias_weights);
            f += h.gamma * r.dot(&r);
        }
        if h.eta > 0.0 {
            let r = self.class_residual(d, &m.class_weights);
            f += h.eta * r.dot(&r);
        }
        f
    }

    fn d_gradient(&self, m: &TriFnModel, xv: &Array2<f64>, vtv: &Array2<f64>) -> Array2<f64> {
        let h = &self.hyper;
        let d = &m.news_factors;
        let mut g = (d.dot(vtv) - xv) * 2.0 + d * (2.0 * h.lambda);
        if h.beta > 0.0 {
            for &(i, j, w) in &self.pairs {
                let diff = &d.row(j) - &m.user_factors.row(i);
                g.row_mut(j).scaled_add(2.0 * h.beta * w, &diff);
            }
        }
        if h.gamma > 0.0 {
            let r = self.bias_residual(d, &m.bias_weights);
            for j in 0..d.nrows() {
                let k = self.nets.publisher_of(j);
                let cnt = self.nets.publishing.row(k).len() as f64;
                g.row_mut(j).scaled_add(2.0 * h.gamma * r[k] / cnt, &m.bias_weights);
            }
        }
        if h.eta > 0.0 {
            let r = self.class_residual(d, &m.class_weights);
            for (k, &j) in self.gold_rows.iter().enumerate() {
                g.row_mut(j).scaled_add(2.0 * h.eta * r[k], &m.class_weights);
            }
        }
        g
    }

    // ---- U block ----

    fn u_block_value(&self, m: &TriFnModel, u: &Array2<f64>) -> f64 {
        let h = &self.hyper;
        let mut f = h.lambda * frob2(u);
        if h.alpha > 0.0 {
            let au = self.nets.adjacency.dot(u);
            f += self.graph_part(&u.t().dot(&au), &u.t().dot(u), &m.user_core);
        }
        if h.beta > 0.0 {
            f += h.beta * self.spreading_term(u, &m.news_factors);
        }
        f
    }

    fn u_gradient(&self, m: &TriFnModel) -> Array2<f64> {
        let h = &self.hyper;
        let u = &m.user_factors;
        let t = &m.user_core;
        let mut g = u * (2.0 * h.lambda);
        if h.alpha > 0.0 {
            let au = self.nets.adjacency.dot(u);
            let gram = u.t().dot(u);
            let t_sym = t + &t.t();
            let inner_core = t.dot(&gram).dot(&t.t()) + t.t().dot(&gram).dot(t);
            g = g + (u.dot(&inner_core) - au.dot(&t_sym)) * (2.0 * h.alpha);
        }
        if h.beta > 0.0 {
            for &(i, j, w) in &self.pairs {
                let diff = &u.row(i) - &m.news_factors.row(j);
                g.row_mut(i).scaled_add(2.0 * h.beta * w, &diff);
            }
        }
        g
    }

    fn update_d(&self, m: &mut TriFnModel, step: &mut f64) {
        let xv = self.nets.content.dot(&m.term_factors);
        let vtv = m.term_factors.t().dot(&m.term_factors);
        let grad = self.d_gradient(m, &xv, &vtv);
        let f0 = self.d_block_value(m, &m.news_factors, &xv, &vtv);
        let new = projected_search(&m.news_factors, &grad, f0, step, |cand| {
            self.d_block_value(m, cand, &xv, &vtv)
        });
        if let Some(d) = new {
            m.news_factors = d;
        }
    }

    fn update_v(&self, m: &mut TriFnModel, step: &mut f64) {
        let lambda = self.hyper.lambda;
        let xtd = self.nets.content.t().dot(&m.news_factors);
        let dtd = m.news_factors.t().dot(&m.news_factors);
        let v = &m.term_factors;
        let grad = (v.dot(&dtd) - &xtd) * 2.0 + v * (2.0 * lambda);
        let value = |cand: &Array2<f64>| {
            -2.0 * inner(cand, &xtd) + inner(&cand.t().dot(cand), &dtd) + lambda * frob2(cand)
        };
        let f0 = value(v);
        if let Some(v) = projected_search(v, &grad, f0, step, value) {
            m.term_factors = v;
        }
    }

    fn update_u(&self, m: &mut TriFnModel, step: &mut f64) {
        let grad = self.u_gradient(m);
        let f0 = self.u_block_value(m, &m.user_factors);
        if let Some(u) = projected_search(&m.user_factors, &grad, f0, step, |cand| {
            self.u_block_value(m, cand)
        }) {
            m.user_factors = u;
        }
    }

    fn update_t(&self, m: &mut TriFnModel, step: &mut f64) {
        let h = self.hyper;
        let u = &m.user_factors;
        let au = self.nets.adjacency.dot(u);
        let utau = u.t().dot(&au);
        let gram = u.t().dot(u);
        let t = &m.user_core;
        let grad = (gram.dot(t).dot(&gram) - &utau) * (2.0 * h.alpha) + t * (2.0 * h.lambda);
        let value = |cand: &Array2<f64>| self.graph_part(&utau, &gram, cand) + h.lambda * frob2(cand);
        let f0 = value(t);
        if let Some(t) = projected_search(t, &grad, f0, step, value) {
            m.user_core = t;
        }
    }

    fn update_q(&self, m: &mut TriFnModel) {
        let h = self.hyper;
        let feats = self.nets.publisher_means(&m.news_factors);
        let value = |q: &Array1<f64>| {
            let r = feats.dot(q) - &self.nets.bias;
            h.gamma * r.dot(&r) + h.lambda * q.dot(q)
        };
        let cand = ridge_solve(&feats, &self.nets.bias, h.gamma, h.lambda);
        if value(&cand) <= value(&m.bias_weights) {
            m.bias_weights = cand;
        }
    }

    fn update_p(&self, m: &mut TriFnModel) {
        let h = self.hyper;
        let feats = m.news_factors.select(Axis(0), &self.gold_rows);
        let value = |p: &Array1<f64>| {
            let r = feats.dot(p) - &self.gold_targets;
            h.eta * r.dot(&r) + h.lambda * p.dot(p)
        };
        let cand = ridge_solve(&feats, &self.gold_targets, h.eta, h.lambda);
        if value(&cand) <= value(&m.class_weights) {
            m.class_weights = cand;
        }
    }
}

const ARMIJO: f64 = 1e-4;
const MAX_BACKTRACKS: usize = 60;

/// One projected-gradient step with backtracking. Returns the accepted
/// candidate, or `None` when no step size decreased the block objective.
fn projected_search(
    x: &Array2<f64>,
    grad: &Array2<f64>,
    f0: f64,
    step: &mut f64,
    value: impl Fn(&Array2<f64>) -> f64,
) -> Option<Array2<f64>> {
    let mut s = *step;
    for _ in 0..MAX_BACKTRACKS {
        let mut cand = x - &(grad * s);
        cand.mapv_inplace(|v| v.max(0.0));
        let decrease = inner(grad, &(&cand - x));
        let f = value(&cand);
        if f.is_finite() && f <= f0 + ARMIJO * decrease {
            *step = (s * 2.0).min(1e12);
            return Some(cand);
        }
        s *= 0.5;
    }
    *step = s.max(1e-12);
    None
}

/// argmin_w  c ‖F w − y‖² + λ ‖w‖², via the SVD pseudo-inverse of the
/// normal equations so rank-deficient systems still yield the minimum-norm
/// minimizer.
fn ridge_solve(feats: &Array2<f64>, y: &Array1<f64>, c: f64, lambda: f64) -> Array1<f64> {
    let k = feats.ncols();
    if c == 0.0 {
        return Array1::zeros(k);
    }
    let ftf = feats.t().dot(feats) * c;
    let rhs = feats.t().dot(y) * c;
    let a = DMatrix::from_fn(k, k, |i, j| ftf[[i, j]] + if i == j { lambda } else { 0.0 });
    let b = DVector::from_iterator(k, rhs.iter().copied());
    let svd = a.svd(true, true);
    let tol = svd.singular_values.max() * (k as f64) * f64::EPSILON;
    match svd.solve(&b, tol) {
        Ok(x) => Array1::from_iter(x.iter().copied()),
        Err(_) => Array1::zeros(k),
    }
}

fn random_factor(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Array2<f64> {
    Array2::from_shape_simple_fn((rows, cols), || rng.random::<f64>() * 0.01)
}

impl TriFnModel {
    /// Seeded initialization: `D, V, U, T` uniform in [0, 0.01] drawn in
    /// that order, `q = p = 0`.
    pub fn init(nets: &InteractionNetworks, hyper: TriFnHyper) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(hyper.seed);
        let d = hyper.d;
        let news_factors = random_factor(&mut rng, nets.n_news(), d);
        let term_factors = random_factor(&mut rng, nets.n_terms(), d);
        let user_factors = random_factor(&mut rng, nets.n_users(), d);
        let user_core = random_factor(&mut rng, d, d);
        TriFnModel {
            news_factors,
            term_factors,
            user_factors,
            user_core,
            bias_weights: Array1::zeros(d),
            class_weights: Array1::zeros(d),
            hyper,
        }
    }

    pub fn n_news(&self) -> usize {
        self.news_factors.nrows()
    }

    /// `clamp(D_j · p, 0, 1)`.
    pub fn predict(&self, news: usize) -> Result<f64> {
        if news >= self.n_news() {
            return Err(Error::IndexOutOfRange {
                index: news,
                len: self.n_news(),
            });
        }
        Ok(self.news_factors.row(news).dot(&self.class_weights).clamp(0.0, 1.0))
    }

    /// Hard decision at 0.5; a tie is classified real.
    pub fn classify(&self, news: usize) -> Result<Label> {
        Ok(if self.predict(news)? > 0.5 {
            Label::Fake
        } else {
            Label::Real
        })
    }

    /// Predict an unseen article from its content row alone by projecting it
    /// onto the term factors: `argmin_{d ≥ 0} ‖x − V d‖²` by 200 projected
    /// gradient steps of size `1 / ‖VᵀV‖₂`.
    pub fn predict_cold_start(&self, x: ArrayView1<'_, f64>) -> Result<f64> {
        if x.len() != self.term_factors.nrows() {
            return Err(Error::ShapeMismatch(format!(
                "content row has {} terms, model has {}",
                x.len(),
                self.term_factors.nrows()
            )));
        }
        if x.iter().all(|&v| v == 0.0) {
            log::warn!("cold-start prediction on an empty content row");
            return Ok(0.5);
        }
        let d = self.project_content(x);
        Ok(d.dot(&self.class_weights).clamp(0.0, 1.0))
    }

    fn project_content(&self, x: ArrayView1<'_, f64>) -> Array1<f64> {
        let v = &self.term_factors;
        let vtv = v.t().dot(v);
        let vtx = v.t().dot(&x);
        let k = vtv.nrows();
        let sym = DMatrix::from_fn(k, k, |i, j| vtv[[i, j]]);
        let lipschitz = SymmetricEigen::new(sym)
            .eigenvalues
            .iter()
            .fold(0.0f64, |a, &e| a.max(e.abs()));
        let mut d = Array1::zeros(k);
        if lipschitz <= 0.0 {
            return d;
        }
        let step = 1.0 / lipschitz;
        for _ in 0..200 {
            let g = vtv.dot(&d) - &vtx;
            d.scaled_add(-step, &g);
            d.mapv_inplace(|v: f64| v.max(0.0));
        }
        d
    }
}

/// Full objective of `model` on `nets` under the given supervision.
pub fn objective(
    model: &TriFnModel,
    nets: &InteractionNetworks,
    sup: Supervision<'_>,
    hyper: &TriFnHyper,
) -> Result<f64> {
    let problem = Problem::new(nets, sup, *hyper)?;
    problem.check_shapes(model)?;
    Ok(problem.objective(model))
}

/// Result of [`fit`]: the model and the objective before the first and after
/// every outer iteration.
#[derive(Debug, Clone)]
pub struct FitOutput {
    pub model: TriFnModel,
    pub trace: Vec<f64>,
}

/// Block coordinate descent cycling `D → V → U → T → q → p`.
pub fn fit(nets: &InteractionNetworks, sup: Supervision<'_>, hyper: TriFnHyper) -> Result<FitOutput> {
    fit_with_observer(nets, sup, hyper, |_| {})
}

/// [`fit`] with a callback invoked on the model after every block update.
pub fn fit_with_observer(
    nets: &InteractionNetworks,
    sup: Supervision<'_>,
    hyper: TriFnHyper,
    mut observe: impl FnMut(&TriFnModel),
) -> Result<FitOutput> {
    hyper.validate()?;
    let problem = Problem::new(nets, sup, hyper)?;
    if hyper.eta > 0.0 && problem.gold_rows.is_empty() {
        return Err(Error::InvalidArgument("eta > 0 requires at least one gold label".into()));
    }
    let mut model = TriFnModel::init(nets, hyper);
    let mut steps = [1.0f64; 4];
    let mut last = problem.objective(&model);
    if !last.is_finite() {
        return Err(Error::Diverged("initial objective is not finite".into()));
    }
    let mut trace = vec![last];
    for iter in 0..hyper.max_iters {
        problem.update_d(&mut model, &mut steps[0]);
        observe(&model);
        problem.update_v(&mut model, &mut steps[1]);
        observe(&model);
        problem.update_u(&mut model, &mut steps[2]);
        observe(&model);
        if hyper.alpha > 0.0 || hyper.lambda > 0.0 {
            problem.update_t(&mut model, &mut steps[3]);
            observe(&model);
        }
        problem.update_q(&mut model);
        problem.update_p(&mut model);
        observe(&model);
        let current = problem.objective(&model);
        if !current.is_finite() {
            return Err(Error::Diverged(format!("objective became {current} at iteration {iter}")));
        }
        trace.push(current);
        let rel = (last - current).abs() / last.abs().max(f64::MIN_POSITIVE);
        last = current;
        if rel < hyper.tol {
            break;
        }
    }
    Ok(FitOutput { model, trace })
}
