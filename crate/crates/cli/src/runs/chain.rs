use rayon::prelude::*;

use uncle_forge_core::gallery::{additivity, localized_pair, AdditivityReport, LocalPair};
use uncle_forge_core::hamiltonian::{assemble_chain, GlobalHamiltonian, MAX_DENSE_MATRIX_DIM};
use uncle_forge_core::kernel::{
    epsilon_kernel, ghz_parent_projector, ghz_uncle_projector, mps_kernel, subspace_distance, uncle_kernel_ghz,
    uncle_limit, KernelSpace, SparseVec,
};
use uncle_forge_core::spectra::{dense_eigenvalues, dense_spectrum, ground_space, spacing_stats, LanczosOptions};
use uncle_forge_core::{ghz_mps, Boundary, CoreError, PerturbationSpec};

use super::{loglog_fit, or_skip, strictly_decreasing, Outcome};
use crate::config::{Backend, ExperimentConfig};
use crate::error::{CliError, Result};
use crate::record::{Check, RecordBuilder, ResultRecord};

/// Parent terms act on three sites, like the uncle terms.
pub const PARENT_RANGE: usize = 3;
/// Largest chain handled by the Krylov solver.
pub const MAX_KRYLOV_SITES: usize = 20;
/// `auto` uses the dense solver up to this many sites.
pub const AUTO_DENSE_SITES: usize = 10;
/// Gap comparisons start at this chain length.
pub const GAP_SWEEP_START: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Model {
    Parent,
    Uncle,
}

impl Model {
    fn name(self) -> &'static str {
        match self {
            Model::Parent => "parent",
            Model::Uncle => "uncle",
        }
    }

    fn hamiltonian(self, n: usize) -> Result<GlobalHamiltonian> {
        let h = match self {
            Model::Parent => ghz_parent_projector(PARENT_RANGE)?,
            Model::Uncle => ghz_uncle_projector(),
        };
        Ok(assemble_chain(&h, n, Boundary::Periodic)?)
    }
}

fn ghz_span(n: usize) -> KernelSpace {
    let all = (1u128 << n) - 1;
    KernelSpace::from_orthonormal(n, vec![vec![(0, 1.0)], vec![(all, 1.0)]], "GHZ span")
}

fn dense_space(vectors: &[Vec<f64>], qubits: usize) -> Result<KernelSpace> {
    let gens: Vec<SparseVec> = vectors
        .iter()
        .map(|v| v.iter().enumerate().filter(|(_, a)| a.abs() > 1e-14).map(|(i, &a)| (i as u128, a)).collect())
        .collect();
    Ok(KernelSpace::from_generators(qubits, gens, "dense ground space")?)
}

fn dense_fits(n: usize) -> bool {
    n < usize::BITS as usize && (1usize << n) <= MAX_DENSE_MATRIX_DIM
}

fn dense_budget_error(n: usize) -> CliError {
    CoreError::BudgetExceeded {
        what: "dense spectrum".into(),
        needed: 1u128 << n,
        budget: MAX_DENSE_MATRIX_DIM as u128,
    }
    .into()
}

fn ghz_point(c: &ExperimentConfig, n: usize, model: Model) -> Result<ResultRecord> {
    let use_dense = match c.backend {
        Backend::Dense => true,
        Backend::Sparse => false,
        Backend::Auto => n <= AUTO_DENSE_SITES,
    };
    let rec = RecordBuilder::new(c, "gap").param("n", n).param("model", model.name()).tolerance("tau_null", c.tolerances.tau_null);
    let h = model.hamiltonian(n)?;
    let (space, lambda1, residual, solver, matvecs) = if use_dense {
        if !dense_fits(n) {
            return Err(dense_budget_error(n));
        }
        let s = dense_spectrum(&h)?;
        let null = s.eigenvalues.iter().filter(|&&l| l < c.tolerances.tau_null).count();
        let residual = s.residuals[..null].iter().copied().fold(0.0, f64::max);
        let space = dense_space(&s.eigenvectors[..null], n)?;
        let lambda1 = s.eigenvalues.get(null).copied().unwrap_or(f64::INFINITY);
        (space, lambda1, residual, "dense", 0)
    } else {
        if n > MAX_KRYLOV_SITES {
            return Err(CoreError::BudgetExceeded {
                what: "Krylov chain length".into(),
                needed: n as u128,
                budget: MAX_KRYLOV_SITES as u128,
            }
            .into());
        }
        let op = h.dense_operator()?;
        let opts = LanczosOptions { tol: c.tolerances.lanczos, seed: c.seed, ..Default::default() };
        let g = ground_space(&op, c.tolerances.tau_null, &opts)?;
        (g.space, g.gap_above, g.max_residual, "lanczos", g.matvecs)
    };
    let distance = subspace_distance(&space, &ghz_span(n))?.value();
    Ok(rec
        .param("solver", solver)
        .scalar("null_dim", space.dim() as f64)
        .scalar("lambda1", lambda1)
        .scalar("ghz_distance", distance)
        .scalar("matvecs", matvecs as f64)
        .residual("null_vectors", residual)
        .tolerance("lanczos", c.tolerances.lanczos)
        .finish())
}

pub fn run_ghz_gap(c: &ExperimentConfig) -> Result<Outcome> {
    let points: Vec<(usize, Model)> =
        c.sizes.values().into_iter().flat_map(|n| [(n, Model::Parent), (n, Model::Uncle)]).collect();
    let records = points
        .par_iter()
        .map(|&(n, m)| or_skip(c, "gap", ghz_point(c, n, m), |b| b.param("n", n).param("model", m.name())))
        .collect::<Result<Vec<_>>>()?;
    let mut checks = Vec::new();
    let done: Vec<&ResultRecord> = records.iter().filter(|r| r.skipped.is_none()).collect();
    let bad_null: Vec<String> = done
        .iter()
        .filter(|r| r.scalar("null_dim") != Some(2.0))
        .map(|r| format!("{} n={}", r.param_str("model").unwrap_or(""), r.param_u64("n").unwrap_or(0)))
        .collect();
    checks.push(Check::new(
        "null-dim-2",
        bad_null.is_empty() && !done.is_empty(),
        format!("{} points computed, wrong null dim at {bad_null:?}", done.len()),
    ));
    let worst = done
        .iter()
        .filter(|r| r.param_str("model") == Some("uncle"))
        .map(|r| r.scalar("ghz_distance").unwrap_or(f64::INFINITY))
        .fold(0.0, f64::max);
    checks.push(Check::new(
        "uncle-ground-space-is-ghz",
        worst < c.tolerances.ground_distance,
        format!("max distance {worst:.3e} (tol {:.0e})", c.tolerances.ground_distance),
    ));
    let series = |model: &str| -> Vec<(usize, f64)> {
        let mut v: Vec<(usize, f64)> = done
            .iter()
            .filter(|r| r.param_str("model") == Some(model))
            .filter_map(|r| Some((r.param_u64("n")? as usize, r.scalar("lambda1")?)))
            .filter(|&(n, _)| n >= GAP_SWEEP_START)
            .collect();
        v.sort_by_key(|p| p.0);
        v
    };
    let parent = series("parent");
    if parent.len() >= 2 {
        let min = parent.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
        let max = parent.iter().map(|p| p.1).fold(0.0, f64::max);
        checks.push(Check::new("parent-gap-stable", min / max > 0.8, format!("min/max lambda1 = {:.4}", min / max)));
    }
    let uncle = series("uncle");
    if uncle.len() >= 2 {
        let vals: Vec<f64> = uncle.iter().map(|p| p.1).collect();
        checks.push(Check::new("uncle-gap-decreasing", strictly_decreasing(&vals), format!("lambda1 = {vals:.5?}")));
        let (first, last) = (uncle[0], uncle[uncle.len() - 1]);
        checks.push(Check::new(
            "uncle-gap-halves",
            last.1 < 0.5 * first.1,
            format!("lambda1({}) / lambda1({}) = {:.4}", last.0, first.0, last.1 / first.1),
        ));
    }
    Ok(Outcome { records, checks })
}

fn density_point(c: &ExperimentConfig, n: usize) -> Result<ResultRecord> {
    if !dense_fits(n) {
        return Err(dense_budget_error(n));
    }
    let rec = RecordBuilder::new(c, "spectrum").param("n", n);
    let h = Model::Uncle.hamiltonian(n)?;
    let s = dense_eigenvalues(&h)?;
    let e = &s.eigenvalues;
    let gap = spacing_stats(e, 0.0, 2.0)?;
    Ok(rec
        .scalar("eigen_count", e.len() as f64)
        .scalar("min_eigenvalue", e.first().copied().unwrap_or(f64::NAN))
        .scalar("max_eigenvalue", e.last().copied().unwrap_or(f64::NAN))
        .scalar("max_spacing_0_2", gap)
        .scalar("levels_in_0_2", e.iter().filter(|&&x| (0.0..=2.0).contains(&x)).count() as f64)
        .series("eigenvalues", e.clone())
        .finish())
}

pub fn run_density(c: &ExperimentConfig) -> Result<Outcome> {
    let sizes = c.sizes.values();
    let records = sizes
        .par_iter()
        .map(|&n| or_skip(c, "spectrum", density_point(c, n), |b| b.param("n", n)))
        .collect::<Result<Vec<_>>>()?;
    let done: Vec<&ResultRecord> = records.iter().filter(|r| r.skipped.is_none()).collect();
    let mut checks = Vec::new();
    let counts_ok = done.iter().all(|r| r.scalar("eigen_count") == Some(2f64.powi(r.param_u64("n").unwrap_or(0) as i32)));
    checks.push(Check::new("full-spectrum", counts_ok && !done.is_empty(), format!("{} sizes diagonalized", done.len())));
    let bounded = done.iter().all(|r| {
        let n = r.param_u64("n").unwrap_or(0) as f64;
        r.scalar("min_eigenvalue").is_some_and(|x| x >= -1e-10) && r.scalar("max_eigenvalue").is_some_and(|x| x <= n + 1e-10)
    });
    checks.push(Check::new("spectrum-in-0-n", bounded, "every eigenvalue lies in [0, n]"));
    if done.len() >= 2 {
        let gaps: Vec<f64> = done.iter().filter_map(|r| r.scalar("max_spacing_0_2")).collect();
        checks.push(Check::new("spacing-shrinks", strictly_decreasing(&gaps), format!("max spacing on [0,2] = {gaps:.5?}")));
    }
    Ok(Outcome { records, checks })
}

/// The perturbation with only `b` entries and `b_1 = -b_0`: the kernel is
/// exactly span{|000>, |111>} at every epsilon.
pub fn triangular_degenerate_perturbation() -> Result<PerturbationSpec> {
    Ok(PerturbationSpec::from_entries(1.0, &[[0.0, 1.0, 0.0, 0.0], [0.0, -1.0, 0.0, 0.0]])?)
}

/// Continue a grid geometrically down to `floor` (at least 4, at most 64 points).
fn limit_grid(grid: &[f64], floor: f64) -> Vec<f64> {
    let q = grid[1] / grid[0];
    let mut out = vec![grid[0]];
    while out.len() < 64 {
        let next = out[out.len() - 1] * q;
        if out.len() >= 4 && next < floor * (1.0 - 1e-9) {
            break;
        }
        out.push(next);
    }
    out
}

/// Smallest epsilon reached when extrapolating the kernel to zero.
pub const LIMIT_FLOOR: f64 = 1e-8;

pub fn run_epsilon_limit(c: &ExperimentConfig) -> Result<Outcome> {
    let a = ghz_mps();
    let uncle = uncle_kernel_ghz();
    let generic = PerturbationSpec::random(1.0, 2, 2, c.seed)?;
    let mut records = Vec::new();
    let mut dists = Vec::new();
    let mut generic_flagged = false;
    for &eps in &c.eps_grid {
        let rec = RecordBuilder::new(c, "distance").param("eps", eps).param("perturbation", "generic");
        let k = epsilon_kernel(&a, &generic.with_epsilon(eps)?, 3)?;
        let d = subspace_distance(&k.space, &uncle)?.value();
        generic_flagged |= k.degenerate_direction;
        dists.push(d);
        records.push(
            rec.scalar("distance", d)
                .scalar("rank", k.space.dim() as f64)
                .flag("degenerate", k.degenerate_direction)
                .scalar("b_sum", k.b_sum)
                .scalar("c_sum", k.c_sum)
                .finish(),
        );
    }
    let unperturbed = RecordBuilder::new(c, "distance").param("eps", 0.0).param("perturbation", "none");
    let parent = mps_kernel(&a, 3)?;
    records.push(
        unperturbed
            .scalar("distance", subspace_distance(&parent, &uncle)?.value())
            .scalar("rank", parent.dim() as f64)
            .finish(),
    );
    let fit = loglog_fit(&c.eps_grid, &dists);
    let slope = fit.map_or(f64::NAN, |f| f.0);
    records.push(
        RecordBuilder::new(c, "slope")
            .param("perturbation", "generic")
            .scalar("slope", slope)
            .scalar("prefactor", fit.map_or(f64::NAN, |f| f.1.exp()))
            .finish(),
    );

    let mut checks = Vec::new();
    checks.push(Check::new("distance-slope-1", (slope - 1.0).abs() <= 0.2, format!("log-log slope {slope:.4}")));
    checks.push(Check::new("generic-not-flagged", !generic_flagged, format!("seed {}", c.seed)));

    let grid = limit_grid(&c.eps_grid, LIMIT_FLOOR);
    let rec = RecordBuilder::new(c, "limit").param("perturbation", "generic").series("grid", grid.clone());
    let generic_limit = match uncle_limit(&a, &generic, 3, &grid, c.tolerances.limit) {
        Ok(l) => {
            let d = subspace_distance(&l.space, &uncle)?.value();
            records.push(
                rec.scalar("epsilon", l.epsilon)
                    .scalar("uncle_distance", d)
                    .scalar("tail_estimate", l.tail_estimates[l.grid_index - 1])
                    .flag("stabilized", true)
                    .series("drift", l.distances.clone())
                    .tolerance("limit", c.tolerances.limit)
                    .finish(),
            );
            checks.push(Check::new(
                "generic-limit-is-uncle",
                d <= c.tolerances.limit,
                format!("distance {d:.3e} at eps {:.0e}", l.epsilon),
            ));
            Some(l.space)
        }
        Err(e @ (CoreError::NoConvergence(_) | CoreError::InvalidParameter(_))) => {
            records.push(rec.flag("stabilized", false).skipped(e.to_string()).finish());
            checks.push(Check::new("generic-limit-is-uncle", false, e.to_string()));
            None
        }
        Err(e) => return Err(e.into()),
    };

    let degenerate = triangular_degenerate_perturbation()?;
    let l = uncle_limit(&a, &degenerate, 3, &grid, c.tolerances.limit)?;
    let reference = generic_limit.unwrap_or_else(|| uncle.clone());
    let apart = subspace_distance(&l.space, &reference)?.value();
    records.push(
        RecordBuilder::new(c, "limit")
            .param("perturbation", "degenerate")
            .scalar("epsilon", l.epsilon)
            .scalar("rank", l.space.dim() as f64)
            .scalar("generic_limit_distance", apart)
            .flag("degenerate", l.degenerate_direction)
            .series("drift", l.distances.clone())
            .finish(),
    );
    checks.push(Check::new("degenerate-flagged", l.degenerate_direction, "b_0 + b_1 = 0"));
    checks.push(Check::new(
        "degenerate-limit-differs",
        apart > 0.1,
        format!("distance {apart:.3} from the generic limit (rank {})", l.space.dim()),
    ));
    Ok(Outcome { records, checks })
}

/// Ritz windows: five sites, one at the start of the chain and one half way.
pub const PAIR_WIDTH: usize = 5;
pub const SEPARATION: usize = 2;

fn pair_record(c: &ExperimentConfig, n: usize, p: &LocalPair) -> ResultRecord {
    RecordBuilder::new(c, "pair")
        .param("n", n)
        .param("start", p.start)
        .param("level", p.level)
        .scalar("lambda", p.eigenvalue)
        .scalar("delta", p.delta)
        .series("ritz_values", p.ritz_values.clone())
        .finish()
}

fn sum_record(c: &ExperimentConfig, n: usize, kind: &str, r: &AdditivityReport) -> ResultRecord {
    RecordBuilder::new(c, kind)
        .param("n", n)
        .scalar("lambda_sum", r.lambda1 + r.lambda2)
        .scalar("rayleigh", r.rayleigh)
        .scalar("deviation", r.deviation)
        .scalar("bound", r.delta1 + r.delta2)
        .residual("eigen_residual", r.residual)
        .finish()
}

fn additivity_point(c: &ExperimentConfig, n: usize) -> Result<(Vec<ResultRecord>, Vec<Check>)> {
    if n < 16 {
        return Err(CliError::Config(format!("additivity needs chains with n >= 16, got {n}")));
    }
    let h = Model::Uncle.hamiltonian(n)?;
    let p1 = localized_pair(&h, 1, PAIR_WIDTH, 0)?;
    let p2 = localized_pair(&h, n / 2 + 1, PAIR_WIDTH, 1)?;
    let both = additivity(&h, &p1, Some(&p2), SEPARATION)?;
    let single = additivity(&h, &p1, None, SEPARATION)?;
    let swapped = additivity(&h, &p2, Some(&p1), SEPARATION)?;
    let shift = |p: &LocalPair| LocalPair { start: p.start + 1, ..p.clone() };
    let shifted = additivity(&h, &shift(&p1), Some(&shift(&p2)), SEPARATION)?;
    let records = vec![
        pair_record(c, n, &p1),
        pair_record(c, n, &p2),
        sum_record(c, n, "sum", &both),
        sum_record(c, n, "single", &single),
        sum_record(c, n, "swapped", &swapped),
        sum_record(c, n, "shifted", &shifted),
    ];
    let checks = vec![
        Check::new(
            &format!("additivity-n{n}"),
            both.deviation <= both.delta1 + both.delta2,
            format!("|{:.6} - {:.6}| = {:.3e} <= {:.3e}", both.rayleigh, both.lambda1 + both.lambda2, both.deviation, both.delta1 + both.delta2),
        ),
        Check::new(
            &format!("single-block-n{n}"),
            single.deviation <= single.delta1,
            format!("{:.3e} <= {:.3e}", single.deviation, single.delta1),
        ),
        Check::new(
            &format!("block-order-n{n}"),
            (swapped.rayleigh - both.rayleigh).abs() < 1e-12,
            format!("difference {:.1e}", (swapped.rayleigh - both.rayleigh).abs()),
        ),
        Check::new(
            &format!("translation-n{n}"),
            (shifted.rayleigh - both.rayleigh).abs() < 1e-12,
            format!("difference {:.1e}", (shifted.rayleigh - both.rayleigh).abs()),
        ),
    ];
    Ok((records, checks))
}

pub fn run_additivity(c: &ExperimentConfig) -> Result<Outcome> {
    let parts = c.sizes.values().par_iter().map(|&n| additivity_point(c, n)).collect::<Result<Vec<_>>>()?;
    let mut out = Outcome::default();
    for (r, ch) in parts {
        out.records.extend(r);
        out.checks.extend(ch);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn limit_grid_extends_geometrically() {
        let g = limit_grid(&[1e-1, 1e-2, 1e-3, 1e-4], 1e-8);
        assert_eq!(g.len(), 8);
        assert!((g[7] / 1e-8 - 1.0).abs() < 1e-9);
        assert_eq!(limit_grid(&[1e-1, 1e-3], 1e-2).len(), 4);
    }
}
