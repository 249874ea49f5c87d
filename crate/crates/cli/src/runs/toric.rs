use rayon::prelude::*;

use uncle_forge_core::gallery::{
    domain_pair_count, enumeration_histogram, gf2_count, ghz_domain_state, phi_energy_bound, square_regions,
    strip_regions, toric_phi, DefectState, RegionSpec,
};
use uncle_forge_core::hamiltonian::{assemble_chain, assemble_patch, assemble_torus, window_sites};
use uncle_forge_core::kernel::{
    containment_residual, ghz_uncle_projector, region_span, subspace_distance, toric_window_projector,
    toric_window_span, RegionKind, WindowKind,
};
use uncle_forge_core::spectra::{
    ground_space, ground_space_candidates, intersect_alternating, LanczosOptions, SubspaceProjector,
};
use uncle_forge_core::gallery::toric::PHI_BUDGET;
use uncle_forge_core::{closure_states, pattern_state, Boundary, LatticeSpec, PatternBoundary, PatternSpec};

use super::{loglog_fit, strictly_decreasing, Outcome};
use crate::config::{Backend, ExperimentConfig};
use crate::error::Result;
use crate::record::{Check, RecordBuilder, ResultRecord};

fn window_name(kind: WindowKind) -> &'static str {
    match kind {
        WindowKind::ParentEven => "parent",
        WindowKind::UncleSum => "uncle",
    }
}

/// Tori with at most this many edges are checked against enumeration.
pub const ENUMERATION_EDGES: usize = 24;

fn enumeration_cases() -> Vec<(LatticeSpec, PatternBoundary, &'static str)> {
    let mut out = Vec::new();
    for rows in 2..=4 {
        for cols in rows..=6 {
            if 2 * rows * cols <= ENUMERATION_EDGES {
                out.push((LatticeSpec::Torus { rows, cols }, PatternBoundary::Closed, "closed"));
            }
        }
    }
    for (rows, cols) in [(2, 2), (2, 3), (3, 3)] {
        let lat = LatticeSpec::Patch { rows, cols };
        let legs = lat.open_legs().len();
        let alternating: Vec<bool> = (0..legs).map(|i| i % 2 == 0).collect();
        out.push((lat, PatternBoundary::Fixed(alternating), "fixed"));
        if lat.edges().len() + legs <= ENUMERATION_EDGES {
            out.push((lat, PatternBoundary::Free, "free"));
        }
    }
    out
}

fn enumeration_record(c: &ExperimentConfig, lat: LatticeSpec, boundary: &PatternBoundary, name: &str) -> Result<ResultRecord> {
    let rec = RecordBuilder::new(c, "gf2-oracle")
        .param("rows", lat.rows())
        .param("cols", lat.cols())
        .param("lattice", if matches!(lat, LatticeSpec::Torus { .. }) { "torus" } else { "patch" })
        .param("boundary", name);
    let hist = enumeration_histogram(&lat, boundary)?;
    let mut mismatches = 0usize;
    let mut odd_parity_nonzero = 0usize;
    let mut unknowns = 0;
    for (mask, &count) in hist.iter().enumerate() {
        let odd: Vec<usize> = (0..lat.num_sites()).filter(|s| mask >> s & 1 == 1).collect();
        let report = gf2_count(&PatternSpec::with_odd(lat, &odd, boundary.clone())?);
        unknowns = report.edges;
        if report.norm_sqr != count as f64 {
            mismatches += 1;
        }
        if matches!(lat, LatticeSpec::Torus { .. }) && odd.len() % 2 == 1 && (count != 0 || report.feasible) {
            odd_parity_nonzero += 1;
        }
    }
    Ok(rec
        .scalar("unknowns", unknowns as f64)
        .scalar("patterns", hist.len() as f64)
        .scalar("mismatches", mismatches as f64)
        .scalar("odd_parity_nonzero", odd_parity_nonzero as f64)
        .finish())
}

fn ground_record(c: &ExperimentConfig, kind: WindowKind) -> Result<(ResultRecord, uncle_forge_core::kernel::KernelSpace)> {
    let rec = RecordBuilder::new(c, "ground").param("rows", 2).param("cols", 2).param("model", window_name(kind));
    let h = assemble_torus(&toric_window_projector(kind)?, 2, 2)?;
    let op = h.dense_operator()?;
    let opts = LanczosOptions { tol: c.tolerances.lanczos, seed: c.seed, ..Default::default() };
    let candidates = closure_states(*h.lattice())?;
    let g = ground_space_candidates(&h, &op, &candidates, c.tolerances.tau_null, c.tolerances.tau_gap, &opts)?;
    let mut rec = rec
        .param("mode", "candidates")
        .scalar("rank", g.space.dim() as f64)
        .scalar("gap_above", g.gap_above)
        .scalar("matvecs", g.matvecs as f64)
        .residual("candidates", g.max_residual)
        .tolerance("tau_null", c.tolerances.tau_null)
        .tolerance("tau_gap", c.tolerances.tau_gap);
    if c.backend != Backend::Dense {
        let eig = ground_space(&op, c.tolerances.tau_null, &opts)?;
        let agree = subspace_distance(&eig.space, &g.space)?.value();
        rec = rec.scalar("eigen_rank", eig.space.dim() as f64).scalar("eigen_candidate_distance", agree);
    }
    Ok((rec.finish(), g.space))
}

pub fn run_toric_ground(c: &ExperimentConfig) -> Result<Outcome> {
    let mut records = Vec::new();
    let mut checks = Vec::new();
    let (parent_rec, parent) = ground_record(c, WindowKind::ParentEven)?;
    let (uncle_rec, uncle) = ground_record(c, WindowKind::UncleSum)?;
    let distance = subspace_distance(&parent, &uncle)?.value();
    let eigen_ok = [&parent_rec, &uncle_rec].iter().all(|r| {
        r.scalar("eigen_rank").is_none_or(|k| Some(k) == r.scalar("rank"))
            && r.scalar("eigen_candidate_distance").is_none_or(|d| d < c.tolerances.ground_distance)
    });
    checks.push(Check::new(
        "torus-ground-spaces-coincide",
        parent.dim() == uncle.dim() && distance < c.tolerances.ground_distance && eigen_ok,
        format!("ranks {} and {}, distance {distance:.3e}", parent.dim(), uncle.dim()),
    ));
    records.push(parent_rec);
    records.push(uncle_rec);
    let window_containment = containment_residual(
        &toric_window_span(WindowKind::ParentEven)?,
        &toric_window_span(WindowKind::UncleSum)?,
    )?;
    records.push(
        RecordBuilder::new(c, "comparison")
            .param("rows", 2)
            .param("cols", 2)
            .scalar("ground_distance", distance)
            .residual("window_containment", window_containment)
            .tolerance("ground_distance", c.tolerances.ground_distance)
            .finish(),
    );
    checks.push(Check::new(
        "parent-window-inside-uncle",
        window_containment < c.tolerances.ground_distance,
        format!("residual {window_containment:.3e}"),
    ));

    // Odd numbers of Odd sites on a torus.
    let torus = LatticeSpec::torus(2, 2)?;
    let mut nonzero = 0;
    let mut tested = 0;
    for mask in 0..16usize {
        let odd: Vec<usize> = (0..4).filter(|s| mask >> s & 1 == 1).collect();
        if odd.len() % 2 == 1 {
            tested += 1;
            let s = pattern_state(&PatternSpec::with_odd(torus, &odd, PatternBoundary::Closed)?)?;
            if s.norm_sqr() != 0.0 {
                nonzero += 1;
            }
        }
    }
    records.push(
        RecordBuilder::new(c, "odd-patterns")
            .param("rows", 2)
            .param("cols", 2)
            .scalar("tested", tested as f64)
            .scalar("nonzero", nonzero as f64)
            .finish(),
    );

    let oracle = enumeration_cases()
        .par_iter()
        .map(|(lat, b, name)| enumeration_record(c, *lat, b, name))
        .collect::<Result<Vec<_>>>()?;
    let mismatches: f64 = oracle.iter().filter_map(|r| r.scalar("mismatches")).sum();
    let odd_nonzero: f64 = oracle.iter().filter_map(|r| r.scalar("odd_parity_nonzero")).sum();
    checks.push(Check::new(
        "odd-torus-patterns-vanish",
        nonzero == 0 && odd_nonzero == 0.0,
        format!("{tested} physical and every enumerated odd-parity torus pattern"),
    ));
    checks.push(Check::new(
        "gf2-matches-enumeration",
        mismatches == 0.0 && !oracle.is_empty(),
        format!("{} lattices, {} patterns, {mismatches} mismatches", oracle.len(), oracle.iter().filter_map(|r| r.scalar("patterns")).sum::<f64>()),
    ));
    records.extend(oracle);

    let mut formula_bad = Vec::new();
    for rows in 2..=6 {
        for cols in 2..=6 {
            let lat = LatticeSpec::torus(rows, cols)?;
            let r = gf2_count(&PatternSpec::all_even(lat, PatternBoundary::Closed)?);
            let log2 = r.log2_count.map_or(-1.0, |l| l as f64);
            if log2 != (rows * cols + 1) as f64 {
                formula_bad.push((rows, cols));
            }
            records.push(
                RecordBuilder::new(c, "torus-count")
                    .param("rows", rows)
                    .param("cols", cols)
                    .scalar("edges", r.edges as f64)
                    .scalar("rank", r.rank as f64)
                    .scalar("log2_count", log2)
                    .finish(),
            );
        }
    }
    checks.push(Check::new("torus-count-nm-plus-1", formula_bad.is_empty(), format!("violations {formula_bad:?}")));
    Ok(Outcome { records, checks })
}

/// The chain carrying the domain-wall superpositions, and their window.
pub const DOMAIN_CHAIN: usize = 18;
pub const DOMAIN_WINDOW: usize = 14;

fn strip_record(c: &ExperimentConfig, len: usize, r: usize) -> Result<ResultRecord> {
    let lat = LatticeSpec::torus(2, len)?;
    let (a, b) = strip_regions(&lat, r)?;
    let rec = RecordBuilder::new(c, "strip").param("rows", 2).param("cols", len).param("r", r);
    let f = DefectState::from_regions(lat, &a, &b)?;
    let reduced = f.rayleigh()?;
    let bound = phi_energy_bound(&lat, &a, &b)?;
    let c2 = gf2_count(&PatternSpec::all_even(lat, PatternBoundary::Closed)?).norm_sqr;
    let pairs = (a.area() * b.area()) as f64;
    let mut rec = rec
        .scalar("rayleigh", reduced)
        .scalar("bound", bound)
        .scalar("c_squared", c2)
        .scalar("pairs", pairs)
        .scalar("norm_sqr", f.reduced_norm_sqr() * c2);
    let support = pairs * c2;
    if c.backend != Backend::Dense && support <= PHI_BUDGET as f64 {
        let h = assemble_torus(&toric_window_projector(WindowKind::UncleSum)?, 2, len)?;
        let phi = toric_phi(lat, &a, &b)?;
        let exact = h.rayleigh(&phi)?;
        rec = rec
            .scalar("physical_rayleigh", exact)
            .scalar("physical_norm_sqr", phi.norm_sqr())
            .residual("reduced_vs_physical", (exact - reduced).abs());
    }
    Ok(rec.finish())
}

fn square_record(c: &ExperimentConfig) -> Result<(ResultRecord, Vec<Check>)> {
    let lat = LatticeSpec::torus(4, 4)?;
    let (a, b) = square_regions(&lat, 1)?;
    let h = assemble_torus(&toric_window_projector(WindowKind::UncleSum)?, 4, 4)?;
    let rec = RecordBuilder::new(c, "square").param("rows", 4).param("cols", 4).param("r", 1);
    let phi = toric_phi(lat, &a, &b)?;
    let c2 = gf2_count(&PatternSpec::all_even(lat, PatternBoundary::Closed)?).norm_sqr;
    let energies = h.term_energies(&phi)?;
    let touches = |w: &[usize], reg: &RegionSpec| reg.sites(&lat).iter().any(|s| w.contains(s));
    let mut interior_max: f64 = 0.0;
    let mut interior = 0;
    let mut idx = 0;
    for row in 0..4 {
        for col in 0..4 {
            let w = window_sites(&lat, row, col);
            let inside = |reg: &RegionSpec| reg.sites(&lat).iter().filter(|s| w.contains(s)).count();
            let boundary = (touches(&w, &a) && inside(&a) < 4) || (touches(&w, &b) && inside(&b) < 4);
            if !boundary {
                interior += 1;
                interior_max = interior_max.max(energies[idx]);
            }
            idx += 1;
        }
    }
    let norm = phi.norm_sqr();
    let rayleigh = energies.iter().sum::<f64>() / norm;
    let bound = phi_energy_bound(&lat, &a, &b)?;
    let pairs = (a.area() * b.area()) as f64;
    let reduced = DefectState::from_regions(lat, &a, &b)?.rayleigh()?;
    let checks = vec![
        Check::new("square-norm-identity", norm == pairs * c2, format!("{norm} = {pairs} x {c2}")),
        Check::new(
            "interior-terms-annihilate",
            interior > 0 && interior_max < 1e-12,
            format!("{interior} interior windows, max energy {interior_max:.1e}"),
        ),
        Check::new("square-below-bound", rayleigh <= bound, format!("{rayleigh:.6} <= {bound}")),
    ];
    let rec = rec
        .scalar("rayleigh", rayleigh)
        .scalar("bound", bound)
        .scalar("norm_sqr", norm)
        .scalar("pairs", pairs)
        .scalar("c_squared", c2)
        .scalar("interior_windows", interior as f64)
        .scalar("interior_max_energy", interior_max)
        .residual("reduced_vs_physical", (reduced - rayleigh).abs())
        .series("term_energies", energies)
        .finish();
    Ok((rec, checks))
}

pub fn run_phi_sweeps(c: &ExperimentConfig) -> Result<Outcome> {
    let mut records = Vec::new();
    let mut checks = Vec::new();

    let h = assemble_chain(&ghz_uncle_projector(), DOMAIN_CHAIN, Boundary::Periodic)?;
    let rs: Vec<usize> = c.r_values.clone();
    let chain = rs
        .par_iter()
        .map(|&r| -> Result<ResultRecord> {
            let rec = RecordBuilder::new(c, "domain").param("n", DOMAIN_CHAIN).param("window", DOMAIN_WINDOW).param("r", r);
            let phi = ghz_domain_state(DOMAIN_CHAIN, r, DOMAIN_WINDOW, 1)?;
            Ok(rec
                .scalar("rayleigh", h.rayleigh(&phi)?)
                .scalar("norm_sqr", phi.norm_sqr())
                .scalar("pairs", domain_pair_count(DOMAIN_WINDOW, r) as f64)
                .finish())
        })
        .collect::<Result<Vec<_>>>()?;
    let xs: Vec<f64> = rs.iter().map(|&r| r as f64 - 1.0).collect();
    let ys: Vec<f64> = chain.iter().filter_map(|r| r.scalar("rayleigh")).collect();
    let norms_ok = chain.iter().all(|r| r.scalar("norm_sqr") == r.scalar("pairs"));
    let fit = loglog_fit(&xs, &ys);
    let slope = fit.map_or(f64::NAN, |f| f.0);
    records.extend(chain);
    records.push(
        RecordBuilder::new(c, "domain-fit")
            .param("n", DOMAIN_CHAIN)
            .param("window", DOMAIN_WINDOW)
            .scalar("slope", slope)
            .scalar("constant", fit.map_or(f64::NAN, |f| f.1.exp()))
            .finish(),
    );
    checks.push(Check::new("domain-slope", (-1.2..=-0.8).contains(&slope), format!("slope {slope:.4} against r - 1")));
    checks.push(Check::new("domain-norms", norms_ok, "squared norm equals the pair count"));
    checks.push(Check::new("domain-decreasing", strictly_decreasing(&ys), format!("{ys:.5?}")));

    let points: Vec<(usize, usize)> = c
        .sizes
        .values()
        .into_iter()
        .flat_map(|len| (1..).take_while(move |r| 2 * r + 2 <= len).map(move |r| (len, r)))
        .collect();
    let strips = points.par_iter().map(|&(len, r)| strip_record(c, len, r)).collect::<Result<Vec<_>>>()?;
    for len in c.sizes.values() {
        let row: Vec<&ResultRecord> = strips.iter().filter(|s| s.param_u64("cols") == Some(len as u64)).collect();
        if row.is_empty() {
            continue;
        }
        let q: Vec<f64> = row.iter().filter_map(|s| s.scalar("rayleigh")).collect();
        let below = row.iter().all(|s| s.scalar("rayleigh") <= s.scalar("bound"));
        checks.push(Check::new(
            &format!("strip-2x{len}-decreasing"),
            q.len() >= 2 && strictly_decreasing(&q),
            format!("rayleigh by r = {q:.5?}"),
        ));
        checks.push(Check::new(&format!("strip-2x{len}-below-bound"), below, "every quotient is at most the counting bound"));
    }
    let physical: Vec<&ResultRecord> = strips.iter().filter(|s| s.residuals.contains_key("reduced_vs_physical")).collect();
    checks.push(Check::new(
        "strip-physical-agreement",
        physical.iter().all(|s| {
            s.residuals["reduced_vs_physical"] < 1e-10 && s.scalar("physical_norm_sqr") == s.scalar("norm_sqr")
        }),
        format!("{} strips rebuilt as physical states", physical.len()),
    ));
    records.extend(strips);

    let (sq, sq_checks) = square_record(c)?;
    records.push(sq);
    checks.extend(sq_checks);
    Ok(Outcome { records, checks })
}

pub fn run_prop1(c: &ExperimentConfig) -> Result<Outcome> {
    let (rows, cols) = (2, 3);
    let lat = LatticeSpec::patch(rows, cols)?;
    let h = assemble_patch(&toric_window_projector(WindowKind::UncleSum)?, rows, cols)?;
    let s23 = region_span(rows, cols, RegionKind::S)?;
    let mut records = Vec::new();
    let mut checks = Vec::new();

    let mut worst: f64 = 0.0;
    for (t, term) in h.terms().iter().enumerate() {
        let mut m: f64 = 0.0;
        for i in 0..s23.dim() {
            m = m.max(term.placed().apply_term(&s23.column_state(lat, i)).norm());
        }
        worst = worst.max(m);
        records.push(
            RecordBuilder::new(c, "containment")
                .param("term", t)
                .param("footprint", format!("{:?}", term.footprint()))
                .scalar("span_dim", s23.dim() as f64)
                .residual("max_term_norm", m)
                .tolerance("containment", c.tolerances.containment)
                .finish(),
        );
    }
    checks.push(Check::new(
        "span-annihilated-by-both-windows",
        worst < c.tolerances.containment && h.term_count() == 2,
        format!("max residual {worst:.2e} over {} vectors", s23.dim()),
    ));

    let projectors: Vec<&dyn SubspaceProjector> = h.terms().iter().map(|t| t.placed() as &dyn SubspaceProjector).collect();
    let inter = intersect_alternating(&projectors, c.seed, c.iteration_cap)?;
    let mut within = 0;
    let mut fp = inter.fixed_points.iter();
    for (i, run) in inter.runs.iter().enumerate() {
        let mut rec = RecordBuilder::new(c, "alternating")
            .param("start", i)
            .scalar("iterations", run.iterations as f64)
            .scalar("final_change", run.final_change)
            .flag("vanished", run.vanished)
            .flag("monotone", run.monotone)
            .tolerance("fixed_point", c.tolerances.fixed_point);
        if !run.vanished {
            let x = fp.next().expect("one fixed point per surviving run");
            let d = s23.residual_norm(x.entries()) / x.norm();
            if d < c.tolerances.fixed_point {
                within += 1;
            }
            rec = rec.scalar("distance_to_span", d);
        }
        records.push(rec.finish());
    }
    checks.push(Check::new(
        "fixed-points-in-span",
        within == inter.runs.len() && !inter.runs.is_empty(),
        format!("{within}/{} within {:.0e}", inter.runs.len(), c.tolerances.fixed_point),
    ));

    let first = h.terms()[0].placed();
    let same = intersect_alternating(&[first as &dyn SubspaceProjector, first], c.seed, c.iteration_cap)?;
    let sanity = same
        .fixed_points
        .iter()
        .map(|x| x.sub(&first.project(x)).norm())
        .fold(0.0, f64::max);
    records.push(
        RecordBuilder::new(c, "sanity")
            .scalar("fixed_points", same.fixed_points.len() as f64)
            .scalar("max_distance", sanity)
            .finish(),
    );
    checks.push(Check::new("identical-subspaces", sanity <= 1e-12 && !same.fixed_points.is_empty(), format!("distance {sanity:.1e}")));
    Ok(Outcome { records, checks })
}
