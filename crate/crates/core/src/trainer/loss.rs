//! Per-pair losses and their analytic gradients.
//!
//! * `D`: `(v·c - pmi)^2`
//! * `L`: `D + a1 (|v| - sqrt(pmi_ii))^2 + a2 (|c| - sqrt(pmi_jj))^2`
//! * `P`: `D + a1 (v·v' - pmi_ii)^2 + a2 (|v| - |v'|)^2`, where `v'` is the
//!   context vector of the target word
//! * shifted: `D` with target `pmi - shift`
//!
//! The norm terms have no gradient at a zero vector; the subgradient used
//! there is zero.
//!
//! The `*_into` kernels accumulate gradients into caller buffers and are what
//! the trainer runs. The allocating wrappers are the public, testable surface.

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

#[inline]
fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// `(v·c - target)^2`, accumulating into `gv` and `gc`.
#[inline]
pub(crate) fn dot_residual_into(v: &[f64], c: &[f64], target: f64, gv: &mut [f64], gc: &mut [f64]) -> f64 {
    let r = dot(v, c) - target;
    axpy(2.0 * r, c, gv);
    axpy(2.0 * r, v, gc);
    r * r
}

/// `alpha (|v| - len)^2`, accumulating into `gv`.
#[inline]
pub(crate) fn length_penalty_into(v: &[f64], len: f64, alpha: f64, gv: &mut [f64]) -> f64 {
    let nv = norm(v);
    let diff = nv - len;
    if nv > 0.0 {
        axpy(2.0 * alpha * diff / nv, v, gv);
    }
    alpha * diff * diff
}

/// `alpha (|v| - |u|)^2`, accumulating into `gv` and `gu`.
#[inline]
pub(crate) fn norm_match_into(v: &[f64], u: &[f64], alpha: f64, gv: &mut [f64], gu: &mut [f64]) -> f64 {
    let (nv, nu) = (norm(v), norm(u));
    let diff = nv - nu;
    if nv > 0.0 {
        axpy(2.0 * alpha * diff / nv, v, gv);
    }
    if nu > 0.0 {
        axpy(-2.0 * alpha * diff / nu, u, gu);
    }
    alpha * diff * diff
}

/// Loss value and gradients with respect to a target and a context vector.
#[derive(Debug, Clone, PartialEq)]
pub struct PairGrad {
    pub loss: f64,
    pub target: Vec<f64>,
    pub context: Vec<f64>,
}

/// Gradients for the P2V-P loss, which also touches the target word's own
/// context vector.
#[derive(Debug, Clone, PartialEq)]
pub struct TripleGrad {
    pub loss: f64,
    pub target: Vec<f64>,
    pub self_context: Vec<f64>,
    pub context: Vec<f64>,
}

fn check_dims(vs: &[&[f64]]) {
    let d = vs[0].len();
    assert!(vs.iter().all(|v| v.len() == d), "vector dimensions differ");
}

pub fn loss_and_grad_d(v: &[f64], c: &[f64], pmi: f64) -> PairGrad {
    check_dims(&[v, c]);
    let (mut gv, mut gc) = (vec![0.0; v.len()], vec![0.0; c.len()]);
    let loss = dot_residual_into(v, c, pmi, &mut gv, &mut gc);
    PairGrad {
        loss,
        target: gv,
        context: gc,
    }
}

/// P2V-L. `self_pmi_i` and `self_pmi_j` must already be clamped to a
/// positive floor; their square roots are the length targets.
pub fn loss_and_grad_l(
    v: &[f64],
    c: &[f64],
    pmi: f64,
    self_pmi_i: f64,
    self_pmi_j: f64,
    alpha1: f64,
    alpha2: f64,
) -> PairGrad {
    check_dims(&[v, c]);
    let (mut gv, mut gc) = (vec![0.0; v.len()], vec![0.0; c.len()]);
    let loss = dot_residual_into(v, c, pmi, &mut gv, &mut gc)
        + length_penalty_into(v, self_pmi_i.sqrt(), alpha1, &mut gv)
        + length_penalty_into(c, self_pmi_j.sqrt(), alpha2, &mut gc);
    PairGrad {
        loss,
        target: gv,
        context: gc,
    }
}

/// P2V-P with `v` the target vector, `v_self` the same word's context vector
/// and `c` the paired context vector.
pub fn loss_and_grad_p(
    v: &[f64],
    v_self: &[f64],
    c: &[f64],
    pmi: f64,
    self_pmi_i: f64,
    alpha1: f64,
    alpha2: f64,
) -> TripleGrad {
    check_dims(&[v, v_self, c]);
    let d = v.len();
    let (mut gv, mut gs, mut gc) = (vec![0.0; d], vec![0.0; d], vec![0.0; d]);
    let mut loss = dot_residual_into(v, c, pmi, &mut gv, &mut gc);
    let mut self_gv = vec![0.0; d];
    let self_term = dot_residual_into(v, v_self, self_pmi_i, &mut self_gv, &mut gs);
    // the self term is weighted by alpha1; rescale what it accumulated
    loss += alpha1 * self_term;
    axpy(alpha1, &self_gv, &mut gv);
    for g in gs.iter_mut() {
        *g *= alpha1;
    }
    loss += norm_match_into(v, v_self, alpha2, &mut gv, &mut gs);
    TripleGrad {
        loss,
        target: gv,
        self_context: gs,
        context: gc,
    }
}

pub fn loss_and_grad_shifted(v: &[f64], c: &[f64], pmi: f64, shift: f64) -> PairGrad {
    loss_and_grad_d(v, c, pmi - shift)
}
