//! Data-fitting and equation-residual losses with their gradients.
//!
//! All quantities are in units of the population. The residuals at mesh
//! node `k` are
//!
//! ```text
//! r_S  = D S  + β S I
//! r_E  = D E  − β S I + σ E
//! r_I  = D I  − σ E + μ I
//! r_R  = D R  − μ I
//! r_Ic = D Ic − σ E
//! ```
//!
//! where `D` is the Caputo-Hadamard quadrature. Because `D` is a fixed linear
//! functional of the samples, its parameter gradient is the same functional
//! applied to the network gradients at the samples; the loss gradient is
//! formed by pushing residual sensitivities through the transposed weights
//! and then back-propagating each network once over the whole mesh.

use serde::{Deserialize, Serialize};

use super::{Compartment, SeirModel, TrainingMesh};
use crate::data::TrainingData;
use crate::fractional::{QuadratureError, QuadratureTable, WeightRows};
use crate::nn::{softplus, softplus_slope, DenseNet, GradientTape, NnError};

/// Per-term loss multipliers, all 1 by default.
///
/// `data` is ordered `[I^n, I^c, R^n, R, I]`, `residual` follows the
/// compartment order `[S, E, I, R, I^c]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossWeights {
    pub data: [f64; 5],
    pub residual: [f64; 5],
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            data: [1.0; 5],
            residual: [1.0; 5],
        }
    }
}

pub const DATA_TERM_NAMES: [&str; 5] = ["I_new", "I_cum", "R_new", "R", "I"];
pub const RESIDUAL_TERM_NAMES: [&str; 5] = ["S", "E", "I", "R", "I_cum"];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossReport {
    pub mse_u: f64,
    pub mse_r: f64,
    pub total: f64,
    /// Unweighted sums of squares, ordered as [`LossWeights::data`].
    pub data_terms: [f64; 5],
    /// Unweighted sums of squares, ordered as [`LossWeights::residual`].
    pub residual_terms: [f64; 5],
}

impl LossReport {
    fn assemble(data_terms: [f64; 5], residual_terms: [f64; 5], weights: &LossWeights) -> Self {
        let mse_u: f64 = data_terms.iter().zip(&weights.data).map(|(t, w)| t * w).sum();
        let mse_r: f64 = residual_terms
            .iter()
            .zip(&weights.residual)
            .map(|(t, w)| t * w)
            .sum();
        LossReport {
            mse_u,
            mse_r,
            total: mse_u + mse_r,
            data_terms,
            residual_terms,
        }
    }

    /// Name of the first non-finite term, if any.
    pub fn non_finite_term(&self) -> Option<String> {
        for (name, v) in DATA_TERM_NAMES.iter().zip(&self.data_terms) {
            if !v.is_finite() {
                return Some(format!("data:{name}"));
            }
        }
        for (name, v) in RESIDUAL_TERM_NAMES.iter().zip(&self.residual_terms) {
            if !v.is_finite() {
                return Some(format!("residual:{name}"));
            }
        }
        if !self.total.is_finite() {
            return Some("total".into());
        }
        None
    }
}

/// Everything besides the model that the loss depends on.
#[derive(Debug, Clone, Copy)]
pub struct LossContext<'a> {
    pub mesh: &'a TrainingMesh,
    pub data: &'a TrainingData,
    pub table: &'a QuadratureTable,
    /// `∂(c/Γ(2−α))/∂α`; without it the order receives no gradient.
    pub sensitivity: Option<&'a WeightRows>,
    pub weights: &'a LossWeights,
}

fn check_table(mesh: &TrainingMesh, table: &QuadratureTable) -> Result<(), QuadratureError> {
    if table.grid() != mesh.grid() {
        return Err(QuadratureError::InvalidGrid(
            "quadrature table was built on a different mesh".into(),
        ));
    }
    Ok(())
}

fn check_data(mesh: &TrainingMesh, data: &TrainingData) -> Result<(), QuadratureError> {
    if data.len() != mesh.n_data() {
        return Err(QuadratureError::LengthMismatch {
            needed: mesh.n_data(),
            got: data.len(),
        });
    }
    Ok(())
}

/// Residuals of the five equations at node `k` of the table's grid.
pub fn residual_at(
    model: &SeirModel,
    table: &QuadratureTable,
    k: usize,
) -> Result<[f64; 5], QuadratureError> {
    let last = table.grid().last_index();
    if k == 0 || k > last {
        return Err(QuadratureError::Index { j: k, k, last });
    }
    let nodes = &table.grid().points()[..=k];
    let mut d = [0.0; 5];
    let mut u = [0.0; 5];
    for c in Compartment::ALL {
        let values = model.network(c).forward_batch(nodes).outputs().to_vec();
        d[c.index()] = table.derivative(&values, k)?;
        u[c.index()] = values[k];
    }
    let t = nodes[k];
    Ok(residuals(&d, &u, model.beta(t), model.mu(t), model.constants.sigma))
}

fn residuals(d: &[f64; 5], u: &[f64; 5], beta: f64, mu: f64, sigma: f64) -> [f64; 5] {
    let [s, e, i, _, _] = *u;
    let infection = beta * s * i;
    [
        d[0] + infection,
        d[1] - infection + sigma * e,
        d[2] - sigma * e + mu * i,
        d[3] - mu * i,
        d[4] - sigma * e,
    ]
}

/// Network values and fractional derivatives over the mesh.
struct MeshValues {
    passes: Vec<crate::nn::ForwardPass>,
    beta_pass: crate::nn::ForwardPass,
    mu_pass: crate::nn::ForwardPass,
    /// `derivs[c][k − 1]` is the derivative of compartment `c` at node `k`.
    derivs: Vec<Vec<f64>>,
}

impl MeshValues {
    fn new(model: &SeirModel, table: &QuadratureTable) -> Result<Self, QuadratureError> {
        let nodes = table.grid().points();
        let passes: Vec<_> = model
            .compartments
            .iter()
            .map(|net| net.forward_batch(nodes))
            .collect();
        let derivs = passes
            .iter()
            .map(|p| table.derivatives(p.outputs()))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self {
            passes,
            beta_pass: model.beta.forward_batch(nodes),
            mu_pass: model.mu.forward_batch(nodes),
            derivs,
        })
    }

    fn u(&self, c: usize) -> &[f64] {
        self.passes[c].outputs()
    }

    fn state(&self, k: usize) -> [f64; 5] {
        std::array::from_fn(|c| self.u(c)[k])
    }

    fn residuals(&self, k: usize, sigma: f64) -> [f64; 5] {
        let d = std::array::from_fn(|c| self.derivs[c][k - 1]);
        let beta = softplus(self.beta_pass.outputs()[k]);
        let mu = softplus(self.mu_pass.outputs()[k]);
        residuals(&d, &self.state(k), beta, mu, sigma)
    }
}

/// Data misfit terms: `(term index, network, mesh index pair, target)`.
/// Daily-new terms compare backward differences of the network over one day
/// and start at the second day.
fn data_misfits(mesh: &TrainingMesh, data: &TrainingData, mv: &MeshValues) -> Vec<DataMisfit> {
    let ic = Compartment::CumulativeInfected.index();
    let r = Compartment::Removed.index();
    let i = Compartment::Infected.index();
    let mut out = Vec::with_capacity(5 * data.len());
    for day in 1..=data.len() {
        let d = day - 1;
        let at = mesh.data_index(day);
        if day >= 2 {
            let prev = mesh.data_index(day - 1);
            out.push(DataMisfit {
                term: 0,
                net: ic,
                at,
                prev: Some(prev),
                error: mv.u(ic)[at] - mv.u(ic)[prev] - data.new_infected[d],
            });
            out.push(DataMisfit {
                term: 2,
                net: r,
                at,
                prev: Some(prev),
                error: mv.u(r)[at] - mv.u(r)[prev] - data.new_removed[d],
            });
        }
        out.push(DataMisfit {
            term: 1,
            net: ic,
            at,
            prev: None,
            error: mv.u(ic)[at] - data.cum_infected[d],
        });
        out.push(DataMisfit {
            term: 3,
            net: r,
            at,
            prev: None,
            error: mv.u(r)[at] - data.removed[d],
        });
        out.push(DataMisfit {
            term: 4,
            net: i,
            at,
            prev: None,
            error: mv.u(i)[at] - data.current_infected[d],
        });
    }
    out
}

struct DataMisfit {
    term: usize,
    net: usize,
    at: usize,
    prev: Option<usize>,
    error: f64,
}

type Evaluation = (MeshValues, Vec<[f64; 5]>, Vec<DataMisfit>, LossReport);

fn evaluate(model: &SeirModel, ctx: &LossContext<'_>) -> Result<Evaluation, QuadratureError> {
    check_table(ctx.mesh, ctx.table)?;
    check_data(ctx.mesh, ctx.data)?;
    let mv = MeshValues::new(model, ctx.table)?;
    let sigma = model.constants.sigma;
    let last = ctx.mesh.last_index();
    let res: Vec<[f64; 5]> = (1..=last).map(|k| mv.residuals(k, sigma)).collect();
    let mut residual_terms = [0.0; 5];
    for r in &res {
        for c in 0..5 {
            residual_terms[c] += r[c] * r[c];
        }
    }
    let misfits = data_misfits(ctx.mesh, ctx.data, &mv);
    let mut data_terms = [0.0; 5];
    for m in &misfits {
        data_terms[m.term] += m.error * m.error;
    }
    let report = LossReport::assemble(data_terms, residual_terms, ctx.weights);
    Ok((mv, res, misfits, report))
}

pub fn loss_report(model: &SeirModel, ctx: &LossContext<'_>) -> Result<LossReport, QuadratureError> {
    Ok(evaluate(model, ctx)?.3)
}

/// Unweighted residual loss: the sum over nodes `1..=K` of all five squared residuals.
pub fn mse_r(
    model: &SeirModel,
    table: &QuadratureTable,
    mesh: &TrainingMesh,
) -> Result<f64, QuadratureError> {
    check_table(mesh, table)?;
    let mv = MeshValues::new(model, table)?;
    let sigma = model.constants.sigma;
    Ok((1..=mesh.last_index())
        .map(|k| mv.residuals(k, sigma).iter().map(|r| r * r).sum::<f64>())
        .sum())
}

/// Unweighted data loss over the day nodes.
pub fn mse_u(
    model: &SeirModel,
    data: &TrainingData,
    mesh: &TrainingMesh,
) -> Result<f64, QuadratureError> {
    check_data(mesh, data)?;
    let nodes = mesh.grid().points();
    let at = |c: Compartment, day: usize| model.fraction(c, nodes[mesh.data_index(day)]);
    let mut total = 0.0;
    for day in 1..=data.len() {
        use Compartment::*;
        let d = day - 1;
        if day >= 2 {
            let e = at(CumulativeInfected, day) - at(CumulativeInfected, day - 1) - data.new_infected[d];
            total += e * e;
            let e = at(Removed, day) - at(Removed, day - 1) - data.new_removed[d];
            total += e * e;
        }
        for (c, target) in [
            (CumulativeInfected, data.cum_infected[d]),
            (Removed, data.removed[d]),
            (Infected, data.current_infected[d]),
        ] {
            let e = at(c, day) - target;
            total += e * e;
        }
    }
    Ok(total)
}

/// Total loss and its gradient in the layout of [`SeirModel::params`].
pub fn loss_and_gradient(
    model: &SeirModel,
    ctx: &LossContext<'_>,
) -> Result<(LossReport, Vec<f64>), LossError> {
    let (mv, res, misfits, report) = evaluate(model, ctx)?;
    let sigma = model.constants.sigma;
    let n_nodes = ctx.mesh.last_index() + 1;
    let w = ctx.weights;

    // dL/dr for each equation at nodes 1..=K.
    let dr: Vec<Vec<f64>> = (0..5)
        .map(|c| res.iter().map(|r| 2.0 * w.residual[c] * r[c]).collect())
        .collect();
    let mut upstream: Vec<Vec<f64>> = Vec::with_capacity(5);
    for g in &dr {
        upstream.push(ctx.table.weights().adjoint(g)?);
    }
    let mut up_beta = vec![0.0; n_nodes];
    let mut up_mu = vec![0.0; n_nodes];
    for k in 1..n_nodes {
        let g: [f64; 5] = std::array::from_fn(|c| dr[c][k - 1]);
        let [s, _, i, _, _] = mv.state(k);
        let zb = mv.beta_pass.outputs()[k];
        let zm = mv.mu_pass.outputs()[k];
        let (beta, mu) = (softplus(zb), softplus(zm));
        let si = g[0] - g[1];
        upstream[0][k] += si * beta * i;
        upstream[2][k] += si * beta * s + (g[2] - g[3]) * mu;
        upstream[1][k] += sigma * (g[1] - g[2] - g[4]);
        up_beta[k] = si * s * i * softplus_slope(zb);
        up_mu[k] = (g[2] - g[3]) * i * softplus_slope(zm);
    }

    for m in &misfits {
        let g = 2.0 * w.data[m.term] * m.error;
        upstream[m.net][m.at] += g;
        if let Some(prev) = m.prev {
            upstream[m.net][prev] -= g;
        }
    }

    let mut grad = Vec::with_capacity(model.param_count());
    for (c, net) in model.compartments.iter().enumerate() {
        grad.extend(net.backward(&mv.passes[c], &upstream[c])?.into_grads());
    }
    grad.extend(model.beta.backward(&mv.beta_pass, &up_beta)?.into_grads());
    grad.extend(model.mu.backward(&mv.mu_pass, &up_mu)?.into_grads());

    let d_alpha = match ctx.sensitivity {
        Some(sens) => {
            let mut acc = 0.0;
            for (c, g) in dr.iter().enumerate() {
                let dd = sens.apply_all(mv.u(c))?;
                acc += g.iter().zip(&dd).map(|(a, b)| a * b).sum::<f64>();
            }
            acc * model.alpha_slope()
        }
        None => 0.0,
    };
    grad.push(d_alpha);
    Ok((report, grad))
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LossError {
    #[error(transparent)]
    Quadrature(#[from] QuadratureError),
    #[error(transparent)]
    Network(#[from] NnError),
}

/// Gradient of `D u_NN(t_k)` with respect to the network's parameters.
pub fn ch_term_gradient(
    net: &DenseNet,
    table: &QuadratureTable,
    k: usize,
) -> Result<GradientTape, LossError> {
    let last = table.grid().last_index();
    if k == 0 || k > last {
        return Err(QuadratureError::Index { j: k, k, last }.into());
    }
    let nodes = &table.grid().points()[..=k];
    let pass = net.forward_batch(nodes);
    let gf = table.gamma_factor();
    let upstream: Vec<f64> = (0..=k).map(|j| gf * table.weights().expanded(k, j)).collect();
    Ok(net.backward(&pass, &upstream)?)
}

/// `∂/∂α` of the quadrature at node `k` for fixed samples.
pub fn ch_term_alpha_gradient(
    sensitivity: &WeightRows,
    values: &[f64],
    k: usize,
) -> Result<f64, QuadratureError> {
    sensitivity.apply(values, k)
}

