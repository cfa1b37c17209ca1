//! Positivity and complete positivity of the dynamical map at a fixed time.
//!
//! Two independent checks are provided. [`cp_paper`] evaluates the four
//! inequalities built from the Bloch-map quantities `p, q, w, y`;
//! [`choi_spectrum`] diagonalises the Choi operator in closed form. For a
//! non-zero phase `Ω` the inequality form is weaker than the Choi test, and
//! [`CpReport::agreement`] records when the two differ.
//!
//! Choi basis ordering: `|i⟩⊗|k⟩ ↦ 2i + k` with index 0 the ground state, so
//! `C = Σ_ij |i⟩⟨j| ⊗ Φ(|i⟩⟨j|)` is `diag(p̄, 1-p̄, q̄, 1-q̄)` plus `κ` at
//! `(0, 3)` and `κ*` at `(3, 0)`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::coeffs::{CoefficientSet, RateProfile};
use crate::dynamics::{bloch_map, AffineBlochMap};
use crate::error::{invalid, Result};

/// Default absolute tolerance on margins and eigenvalues.
pub const DEFAULT_TOL: f64 = 1e-9;

/// `(p, q, w, y)` with `w = |κ| cos Ω` and `y = i |κ| sin Ω`.
pub fn pqwy(c: &CoefficientSet) -> (f64, f64, Complex64, Complex64) {
    let m = bloch_map(c);
    let p = 0.5 * (m.t3 + m.lambda3);
    let q = 0.5 * (m.t3 - m.lambda3);
    let (l1, l2) = (m.kappa, m.kappa.conj());
    (p, q, 0.5 * (l1 + l2), 0.5 * (l1 - l2))
}

/// A condition's verdict with the signed slack (non-negative when it holds).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Condition {
    pub holds: bool,
    pub margin: f64,
}

impl Condition {
    fn new(margin: f64, tol: f64) -> Self {
        Self {
            holds: margin >= -tol,
            margin,
        }
    }
}

/// Margins of conditions i)–iv).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PaperConditions {
    pub cond_i: Condition,
    pub cond_ii: Condition,
    pub cond_iii: Condition,
    pub cond_iv: Condition,
    /// Condition iv) rewritten for vanishing dephasing; only present when `|Γ̃| <= tol`.
    pub cond_iv_recast: Option<Condition>,
}

impl PaperConditions {
    pub fn all_hold(&self) -> bool {
        self.cond_i.holds && self.cond_ii.holds && self.cond_iii.holds && self.cond_iv.holds
    }

    /// Conditions i) and ii): the map is positive on populations.
    pub fn positive(&self) -> bool {
        self.cond_i.holds && self.cond_ii.holds
    }
}

/// Evaluate conditions i)–iv) using `λ = e^{-Γ}`, `p̄ = λ + g`, `q̄ = g`:
///
/// * i)   `0 <= p̄ <= 1`
/// * ii)  `0 <= q̄ <= 1`
/// * iii) `-|κ|² sin²Ω <= q̄ (1 - p̄)`
/// * iv)  `|κ|² cos²Ω <= p̄ (1 - q̄)`
pub fn cp_paper(c: &CoefficientSet, tol: f64) -> Result<PaperConditions> {
    if !(tol > 0.0) {
        return invalid(format!("tolerance must be positive, got {tol}"));
    }
    let lambda = c.decay();
    let p_bar = c.p_bar();
    let q_bar = c.q_bar();
    let k2 = c.coherence_modulus_sq();
    let (sin, cos) = c.omega.sin_cos();
    let recast = (c.gamma_tilde.abs() <= tol)
        .then(|| Condition::new(lambda * (1.0 - cos * cos) + q_bar * (1.0 - p_bar), tol));
    Ok(PaperConditions {
        cond_i: Condition::new(p_bar.min(1.0 - p_bar), tol),
        cond_ii: Condition::new(q_bar.min(1.0 - q_bar), tol),
        cond_iii: Condition::new(q_bar * (1.0 - p_bar) + k2 * sin * sin, tol),
        cond_iv: Condition::new(p_bar * (1.0 - q_bar) - k2 * cos * cos, tol),
        cond_iv_recast: recast,
    })
}

/// Eigenvalues of the Choi operator, ascending. They sum to 2.
pub fn choi_spectrum(m: &AffineBlochMap) -> [f64; 4] {
    let p_bar = m.p_bar();
    let q_bar = m.q_bar();
    let k2 = m.kappa.norm_sqr();
    // 2×2 block [[p̄, κ], [κ*, 1 - q̄]]
    let (a, d) = (p_bar, 1.0 - q_bar);
    let tr = a + d;
    let root = ((a - d).powi(2) + 4.0 * k2).sqrt();
    let hi = 0.5 * (tr + root);
    let det = a * d - k2;
    // Avoid cancellation in the small root.
    let lo = if hi > 0.0 && tr > 0.0 {
        det / hi
    } else {
        0.5 * (tr - root)
    };
    let mut ev = [1.0 - p_bar, q_bar, lo, hi];
    ev.sort_by(f64::total_cmp);
    ev
}

/// Choi criterion in inequality form: `p̄, q̄ ∈ [0, 1]` and `|κ|² <= p̄ (1 - q̄)`.
pub fn choi_is_cp(m: &AffineBlochMap, tol: f64) -> bool {
    choi_spectrum(m)[0] >= -tol
}

/// Per-time verdicts of both checkers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CpReport {
    pub t: f64,
    pub p: f64,
    pub q: f64,
    pub w: Complex64,
    pub y: Complex64,
    pub conditions: PaperConditions,
    pub paper_verdict: bool,
    pub choi_min_eig: f64,
    pub choi_verdict: bool,
    pub agreement: bool,
}

pub fn cp_report(c: &CoefficientSet, tol: f64) -> Result<CpReport> {
    let conditions = cp_paper(c, tol)?;
    let (p, q, w, y) = pqwy(c);
    let choi_min_eig = choi_spectrum(&bloch_map(c))[0];
    let paper_verdict = conditions.all_hold();
    let choi_verdict = choi_min_eig >= -tol;
    Ok(CpReport {
        t: c.t,
        p,
        q,
        w,
        y,
        conditions,
        paper_verdict,
        choi_min_eig,
        choi_verdict,
        agreement: paper_verdict == choi_verdict,
    })
}

/// Outcome of a sign test that may be undecidable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Check {
    Pass,
    Fail,
    /// The rate is not finite at the test point.
    Indeterminate,
}

impl Check {
    fn from_value(v: f64, tol: f64) -> Self {
        if !v.is_finite() {
            Check::Indeterminate
        } else if v >= -tol {
            Check::Pass
        } else {
            Check::Fail
        }
    }

    pub fn passed(self) -> bool {
        self == Check::Pass
    }
}

/// Initial-rate checks `γ_k(0) >= 0`, with the values that were tested.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShortTimeReport {
    pub initial_rates: [f64; 3],
    pub checks: [Check; 3],
}

/// Short-time conditions: the decay rates may not start negative.
pub fn short_time_check(profile: &RateProfile, tol: f64) -> Result<ShortTimeReport> {
    if !(tol > 0.0) {
        return invalid(format!("tolerance must be positive, got {tol}"));
    }
    let [g1, g2, g3, _] = profile.rates(0.0);
    let initial_rates = [g1, g2, g3];
    Ok(ShortTimeReport {
        initial_rates,
        checks: initial_rates.map(|v| Check::from_value(v, tol)),
    })
}

/// Weak-coupling conditions: `∫γ1, ∫γ2, ∫γ3 >= 0`.
pub fn weak_coupling_check(i1: f64, i2: f64, i3: f64, tol: f64) -> [bool; 3] {
    [i1, i2, i3].map(|v| v >= -tol)
}
