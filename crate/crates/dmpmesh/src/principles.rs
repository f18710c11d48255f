//! Matrix-level and solution-level verification of discrete maximum
//! principles (DwMP/DWMP/DsMP/DSMP), comparison principles, minimum and
//! min-max principles, and the non-negative constraint.
//!
//! The matrix-level verdicts follow the necessary-and-sufficient
//! characterization on the partitioned stiffness [K_ff | K_fp]:
//!
//! ```text
//!   DwMP_K:  K_ff^-1 >= 0,  -K_ff^-1 K_fp >= 0,  -K_ff^-1 K_fp 1 <= 1
//!   DWMP_K:  ... and the coupling row sums equal 1
//!   DsMP_K:  strict positivity and row sums < 1 or = 1 (uniformly)
//!   DSMP_K:  strict positivity and row sums = 1
//! ```
//!
//! K_ff^-1 is formed by free-DOF solves against identity columns and is only
//! attempted below a configurable dense cap.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::Serialize;

use crate::assembly::sparse::SkylineLu;
use crate::assembly::{solve_with, AssembledSystem};
use crate::mesh::Triangulation;
use crate::{Error, Result};

/// Free DOFs above which the dense inverse is not formed (the exact
/// verdicts are then reported as not computed).
pub const DEFAULT_DENSE_CAP: usize = 4000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Dominance {
    Strict,
    Weak,
    None,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RowSumClass {
    /// every row sum equals 1 (within tolerance)
    EqualOne,
    /// every row sum strictly below 1
    BelowOne,
    /// all row sums <= 1, some equal and some below
    AtMostOneMixed,
    /// some row sum exceeds 1
    Exceeds,
}

/// Per-row dominance classification of K_ff with offending entries.
#[derive(Clone, Debug, Serialize)]
pub struct DominanceReport {
    pub z_matrix: bool,
    pub diag_positive: bool,
    pub dominance: Dominance,
    /// row with the smallest dominance margin |a_ii| - sum |a_ij|
    pub worst_row: usize,
    pub worst_margin: f64,
    /// positive off-diagonal entries (i, j, value), capped
    pub positive_offdiagonals: Vec<(usize, usize, f64)>,
    pub strictly_dominant_rows: usize,
    /// these conditions are sufficient, not necessary, for monotonicity
    pub note: &'static str,
}

const OFFDIAG_CAP: usize = 32;

/// Classifies positive diagonal / Z-matrix structure / row dominance.
pub fn classify_dominance(k_ff: &crate::assembly::sparse::CsrMatrix) -> DominanceReport {
    let n = k_ff.nrows();
    let scale = (0..n)
        .flat_map(|i| k_ff.row(i))
        .map(|(_, v)| v.abs())
        .fold(0.0f64, f64::max)
        .max(1e-300);
    let ztol = 1e-13 * scale;
    let mut z_matrix = true;
    let mut diag_positive = true;
    let mut positive_offdiagonals = Vec::new();
    let mut worst_row = 0;
    let mut worst_margin = f64::INFINITY;
    let mut strict_rows = 0;
    let mut weak_all = true;
    for i in 0..n {
        let mut diag = 0.0;
        let mut off_abs = 0.0;
        for (j, v) in k_ff.row(i) {
            if j == i {
                diag = v;
            } else {
                off_abs += v.abs();
                if v > ztol {
                    z_matrix = false;
                    if positive_offdiagonals.len() < OFFDIAG_CAP {
                        positive_offdiagonals.push((i, j, v));
                    }
                }
            }
        }
        if diag <= 0.0 {
            diag_positive = false;
        }
        let margin = diag.abs() - off_abs;
        if margin < worst_margin {
            worst_margin = margin;
            worst_row = i;
        }
        let tol = 1e-12 * scale;
        if margin > tol {
            strict_rows += 1;
        } else if margin < -tol {
            weak_all = false;
        }
    }
    let dominance = if !weak_all {
        Dominance::None
    } else if strict_rows == n {
        Dominance::Strict
    } else {
        Dominance::Weak
    };
    DominanceReport {
        z_matrix,
        diag_positive,
        dominance,
        worst_row,
        worst_margin,
        positive_offdiagonals,
        strictly_dominant_rows: strict_rows,
        note: "sufficient, but not necessary, for K_ff to be monotone",
    }
}

/// Matrix-level principle report.
#[derive(Clone, Debug, Serialize)]
pub struct MatrixPrincipleReport {
    pub n_f: usize,
    pub n_p: usize,
    pub dominance: DominanceReport,
    pub irreducible: Option<bool>,
    /// entrywise tolerance used for the >= 0 checks
    pub tol: f64,
    /// exact verdicts; None when n_f exceeded the dense cap
    pub inverse_nonneg: Option<bool>,
    pub coupling_nonneg: Option<bool>,
    pub rowsum: Option<RowSumClass>,
    pub dwmp_k: Option<bool>,
    pub dwmp_strict_k: Option<bool>,
    pub dsmp_k: Option<bool>,
    pub dsmp_strict_k: Option<bool>,
    /// most negative entry of K_ff^-1 as (row, col, value)
    pub inverse_min_entry: Option<(usize, usize, f64)>,
    /// most negative entry of -K_ff^-1 K_fp
    pub coupling_min_entry: Option<(usize, usize, f64)>,
}

impl MatrixPrincipleReport {
    fn assert_inclusions(&self) {
        // DSMP => DsMP and DWMP; DWMP/DsMP => DwMP
        if self.dsmp_strict_k == Some(true) {
            debug_assert_eq!(self.dsmp_k, Some(true));
            debug_assert_eq!(self.dwmp_strict_k, Some(true));
        }
        if self.dsmp_k == Some(true) || self.dwmp_strict_k == Some(true) {
            debug_assert_eq!(self.dwmp_k, Some(true));
        }
    }
}

/// Exact inverse of K_ff by identity-column solves against a shared
/// factorization.
pub fn dense_inverse(sys: &AssembledSystem) -> Result<DMatrix<f64>> {
    let n = sys.n_f();
    let lu = SkylineLu::factor(&sys.k_ff)?;
    let cols: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|j| {
            let mut e = vec![0.0; n];
            e[j] = 1.0;
            lu.solve(&e)
        })
        .collect();
    let mut inv = DMatrix::zeros(n, n);
    for (j, col) in cols.iter().enumerate() {
        for i in 0..n {
            inv[(i, j)] = col[i];
        }
    }
    Ok(inv)
}

fn min_entry(m: &DMatrix<f64>) -> (usize, usize, f64) {
    let mut best = (0, 0, f64::INFINITY);
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            if m[(i, j)] < best.2 {
                best = (i, j, m[(i, j)]);
            }
        }
    }
    best
}

fn coupling_matrix(sys: &AssembledSystem, inv: &DMatrix<f64>) -> DMatrix<f64> {
    let n_f = sys.n_f();
    let n_p = sys.n_p();
    let mut coupling = DMatrix::zeros(n_f, n_p);
    for k in 0..n_f {
        for (j, v) in sys.k_fp.row(k) {
            for i in 0..n_f {
                coupling[(i, j)] -= inv[(i, k)] * v;
            }
        }
    }
    coupling
}

/// Verifies the necessary-and-sufficient matrix conditions along with the
/// sufficient (dominance) conditions. Supplying the mesh routes the
/// irreducibility question through interior connectivity; otherwise the
/// strongly-connected components of the K_ff sparsity graph are used.
pub fn check_matrix_principles(
    sys: &AssembledSystem,
    mesh: Option<&Triangulation>,
    dense_cap: usize,
) -> Result<MatrixPrincipleReport> {
    let n_f = sys.n_f();
    if n_f == 0 {
        return Err(Error::Config("system has no free DOFs".into()));
    }
    let dominance = classify_dominance(&sys.k_ff);
    let irreducible = Some(match mesh {
        Some(tri) => tri.is_interiorly_connected().0,
        None => sparsity_strongly_connected(&sys.k_ff),
    });

    if n_f > dense_cap {
        let report = MatrixPrincipleReport {
            n_f,
            n_p: sys.n_p(),
            dominance,
            irreducible,
            tol: f64::NAN,
            inverse_nonneg: None,
            coupling_nonneg: None,
            rowsum: None,
            dwmp_k: None,
            dwmp_strict_k: None,
            dsmp_k: None,
            dsmp_strict_k: None,
            inverse_min_entry: None,
            coupling_min_entry: None,
        };
        return Ok(report);
    }

    let inv = dense_inverse(sys)?;
    // round-off in the identity-column solves scales with the inverse
    let tol = 1e-11 * inv.amax();
    let coupling = coupling_matrix(sys, &inv);

    let inverse_min = min_entry(&inv);
    let coupling_min = min_entry(&coupling);
    let inverse_nonneg = inverse_min.2 >= -tol;
    let coupling_nonneg = coupling_min.2 >= -tol;
    let inverse_strict = inv.iter().all(|&v| v > tol);
    let coupling_strict = coupling.iter().all(|&v| v > tol);

    let n_p = sys.n_p();
    let row_sums: Vec<f64> = (0..n_f)
        .map(|i| (0..n_p).map(|j| coupling[(i, j)]).sum())
        .collect();
    let all_at_most = row_sums.iter().all(|&s| s <= 1.0 + tol);
    let all_equal = row_sums.iter().all(|&s| (s - 1.0).abs() <= tol);
    let all_below = row_sums.iter().all(|&s| s < 1.0 - tol);
    let rowsum = if all_equal {
        RowSumClass::EqualOne
    } else if all_below {
        RowSumClass::BelowOne
    } else if all_at_most {
        RowSumClass::AtMostOneMixed
    } else {
        RowSumClass::Exceeds
    };

    let dwmp_k = inverse_nonneg && coupling_nonneg && all_at_most;
    let dwmp_strict_k = inverse_nonneg && coupling_nonneg && all_equal;
    // "< 1 or = 1" reads as uniformly below or uniformly equal; mixed rows fail
    let dsmp_k = inverse_strict && coupling_strict && (all_below || all_equal);
    let dsmp_strict_k = inverse_strict && coupling_strict && all_equal;

    let report = MatrixPrincipleReport {
        n_f,
        n_p,
        dominance,
        irreducible,
        tol,
        inverse_nonneg: Some(inverse_nonneg),
        coupling_nonneg: Some(coupling_nonneg),
        rowsum: Some(rowsum),
        dwmp_k: Some(dwmp_k),
        dwmp_strict_k: Some(dwmp_strict_k),
        dsmp_k: Some(dsmp_k),
        dsmp_strict_k: Some(dsmp_strict_k),
        inverse_min_entry: Some(inverse_min),
        coupling_min_entry: Some(coupling_min),
    };
    report.assert_inclusions();
    Ok(report)
}

/// Tarjan strongly-connected components on the sparsity pattern (iterative).
fn sparsity_strongly_connected(k: &crate::assembly::sparse::CsrMatrix) -> bool {
    let n = k.nrows();
    if n <= 1 {
        return true;
    }
    let adj: Vec<Vec<usize>> = (0..n)
        .map(|i| {
            k.row(i)
                .filter(|&(j, v)| j != i && v != 0.0)
                .map(|(j, _)| j)
                .collect()
        })
        .collect();
    let mut index = vec![usize::MAX; n];
    let mut low = vec![0usize; n];
    let mut on_stack = vec![false; n];
    let mut stack = Vec::new();
    let mut next_index = 0;
    let mut components = 0;

    for root in 0..n {
        if index[root] != usize::MAX {
            continue;
        }
        // explicit DFS stack of (vertex, next child position)
        let mut dfs: Vec<(usize, usize)> = vec![(root, 0)];
        index[root] = next_index;
        low[root] = next_index;
        next_index += 1;
        stack.push(root);
        on_stack[root] = true;
        while let Some(&mut (v, ref mut child)) = dfs.last_mut() {
            if *child < adj[v].len() {
                let w = adj[v][*child];
                *child += 1;
                if index[w] == usize::MAX {
                    index[w] = next_index;
                    low[w] = next_index;
                    next_index += 1;
                    stack.push(w);
                    on_stack[w] = true;
                    dfs.push((w, 0));
                } else if on_stack[w] {
                    low[v] = low[v].min(index[w]);
                }
            } else {
                dfs.pop();
                if let Some(&(parent, _)) = dfs.last() {
                    low[parent] = low[parent].min(low[v]);
                }
                if low[v] == index[v] {
                    components += 1;
                    if components > 1 {
                        return false;
                    }
                    while let Some(w) = stack.pop() {
                        on_stack[w] = false;
                        if w == v {
                            break;
                        }
                    }
                }
            }
        }
    }
    components == 1
}

/// Solution-level principle report.
#[derive(Clone, Debug, Serialize)]
pub struct SolutionPrincipleReport {
    pub min_c: f64,
    pub max_c: f64,
    pub min_cp: f64,
    pub max_cp: f64,
    /// r <= 0 entrywise (hypothesis of the maximum principles)
    pub r_nonpositive: bool,
    /// r = 0 entrywise (hypothesis of the min-max principle)
    pub r_zero: bool,
    /// max c <= max(0, max c_p) + tol; None when r has positive entries
    pub dwmp: Option<bool>,
    /// max c = max c_p within tol; None when r has positive entries
    pub dwmp_strict: Option<bool>,
    /// min-max sandwich; None unless r = 0
    pub min_max: Option<bool>,
    /// non-negative constraint: min c >= -tol
    pub nc: bool,
    pub pct_below: Option<f64>,
    pub pct_above: Option<f64>,
    /// node indices of the extreme values
    pub argmin: usize,
    pub argmax: usize,
    pub tol: f64,
}

/// Evaluates the solution-level principles for a nodal field on a system.
/// `bounds = (lower, upper)` adds the percentage of nodes violating the
/// physical bounds.
pub fn check_solution_principles(
    sys: &AssembledSystem,
    c: &[f64],
    bounds: Option<(f64, f64)>,
    tol: f64,
) -> Result<SolutionPrincipleReport> {
    if c.len() != sys.n_t {
        return Err(Error::Mismatch(format!(
            "nodal field has length {}, expected {}",
            c.len(),
            sys.n_t
        )));
    }
    let (mut argmin, mut argmax) = (0, 0);
    for (i, &v) in c.iter().enumerate() {
        if v < c[argmin] {
            argmin = i;
        }
        if v > c[argmax] {
            argmax = i;
        }
    }
    let min_c = c[argmin];
    let max_c = c[argmax];
    let min_cp = sys.c_p.iter().copied().fold(f64::INFINITY, f64::min);
    let max_cp = sys.c_p.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let r_nonpositive = sys.r_f.iter().all(|&r| r <= tol);
    let r_zero = sys.r_f.iter().all(|&r| r.abs() <= tol);

    let dwmp = r_nonpositive.then(|| max_c <= max_cp.max(0.0) + tol);
    let dwmp_strict = r_nonpositive.then(|| (max_c - max_cp).abs() <= tol);
    let min_max = r_zero.then_some(min_c >= min_cp - tol && max_c <= max_cp + tol);
    let nc = min_c >= -tol;

    let (pct_below, pct_above) = match bounds {
        Some((lo, hi)) => {
            let below = c.iter().filter(|&&v| v < lo - tol).count();
            let above = c.iter().filter(|&&v| v > hi + tol).count();
            let n = c.len() as f64;
            (
                Some(100.0 * below as f64 / n),
                Some(100.0 * above as f64 / n),
            )
        }
        None => (None, None),
    };

    Ok(SolutionPrincipleReport {
        min_c,
        max_c,
        min_cp,
        max_cp,
        r_nonpositive,
        r_zero,
        dwmp,
        dwmp_strict,
        min_max,
        nc,
        pct_below,
        pct_above,
        argmin,
        argmax,
        tol,
    })
}

/// Outcome of a discrete comparison-principle experiment.
#[derive(Clone, Debug, Serialize)]
pub struct DcpReport {
    /// cp1 <= cp2 and r1 <= r2 (strict mode: r1 < r2 entrywise)
    pub hypothesis_ok: bool,
    /// c1 <= c2 everywhere (strict mode: c1 < c2 on free DOFs)
    pub conclusion_ok: bool,
    pub strict: bool,
    /// worst violation max(c1 - c2) over the checked DOFs
    pub worst_gap: f64,
    pub principle_used: &'static str,
}

/// Solves the system under both data sets and checks the comparison
/// conclusion. A violated hypothesis is reported, with the conclusion still
/// evaluated for diagnostics.
pub fn check_dcp(
    sys: &AssembledSystem,
    r1: &[f64],
    r2: &[f64],
    cp1: &[f64],
    cp2: &[f64],
    strict: bool,
    tol: f64,
) -> Result<DcpReport> {
    let hyp_bc = cp1.iter().zip(cp2).all(|(a, b)| a <= &(b + tol));
    let hyp_r = if strict {
        r1.iter().zip(r2).all(|(a, b)| *a < b - tol)
    } else {
        r1.iter().zip(r2).all(|(a, b)| a <= &(b + tol))
    };
    let c1 = solve_with(sys, r1, cp1)?;
    let c2 = solve_with(sys, r2, cp2)?;
    let (conclusion_ok, worst_gap) = if strict {
        // strict conclusion on free DOFs only
        let mut ok = true;
        let mut worst = f64::NEG_INFINITY;
        for &k in &sys.free_dofs {
            let gap = c1[k] - c2[k];
            worst = worst.max(gap);
            if gap >= -tol {
                ok = false;
            }
        }
        (ok, worst)
    } else {
        let mut worst = f64::NEG_INFINITY;
        for (a, b) in c1.iter().zip(&c2) {
            worst = worst.max(a - b);
        }
        (worst <= tol, worst)
    };
    Ok(DcpReport {
        hypothesis_ok: hyp_bc && hyp_r,
        conclusion_ok,
        strict,
        worst_gap,
        principle_used: if strict { "DsCP" } else { "DwCP" },
    })
}

/// A DwMP violation witness: the source r_f <= 0, the boundary data c_p,
/// and the node whose value exceeds the admissible maximum.
pub type DwmpWitness = (Vec<f64>, Vec<f64>, usize);

/// Constructs an explicit DwMP violation witness (r <= 0, c_p) when the
/// matrix verdict fails: the column of a negative entry of K_ff^-1 or of
/// -K_ff^-1 K_fp yields a solution whose maximum exceeds max(0, max c_p).
/// Returns (r_f, c_p, node index of the violating maximum), scaled so the
/// excess is at least `margin`.
pub fn construct_dwmp_witness(sys: &AssembledSystem, margin: f64) -> Result<Option<DwmpWitness>> {
    let inv = dense_inverse(sys)?;
    let tol = 1e-11 * inv.amax();
    let (i, j, v) = min_entry(&inv);
    if v < -tol {
        // r = -s e_j with c_p = 0: c_i = -s (K_ff^-1)_{ij} > 0 = max(0, max c_p)
        let s = 2.0 * margin / (-v);
        let mut r = vec![0.0; sys.n_f()];
        r[j] = -s;
        let cp = vec![0.0; sys.n_p()];
        return Ok(Some((r, cp, sys.free_dofs[i])));
    }
    // negative coupling entry at (i, j): take c_p = -s e_j <= 0 and r = 0;
    // c_f = (-K_ff^-1 K_fp)(-s e_j) has entry i equal to s * |entry| > 0
    let coupling = coupling_matrix(sys, &inv);
    let (i, j, v) = min_entry(&coupling);
    if v < -tol {
        let s = 2.0 * margin / (-v);
        let r = vec![0.0; sys.n_f()];
        let mut cp = vec![0.0; sys.n_p()];
        cp[j] = -s;
        return Ok(Some((r, cp, sys.free_dofs[i])));
    }
    Ok(None)
}
