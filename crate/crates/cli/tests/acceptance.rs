//! Runs every experiment with its default configuration and re-evaluates
//! the acceptance criteria directly from the records, printing one line per
//! criterion.

use std::collections::BTreeMap;
use std::time::Instant;

use uncle_forge::runs::{self, loglog_fit};
use uncle_forge::{Experiment, ExperimentConfig, ResultRecord, RunDocument};

struct Verdict {
    name: &'static str,
    passed: bool,
    detail: String,
}

fn verdict(name: &'static str, passed: bool, detail: impl Into<String>) -> Verdict {
    Verdict { name, passed, detail: detail.into() }
}

fn kind<'a>(doc: &'a RunDocument, k: &'a str) -> Vec<&'a ResultRecord> {
    doc.of_kind(k).collect()
}

fn s(r: &ResultRecord, key: &str) -> f64 {
    r.scalar(key).unwrap_or(f64::NAN)
}

fn n_of(r: &ResultRecord, key: &str) -> usize {
    r.param_u64(key).map_or(usize::MAX, |v| v as usize)
}

fn decreasing(v: &[f64]) -> bool {
    v.len() >= 2 && v.windows(2).all(|w| w[1] < w[0])
}

fn ghz_ground(doc: &RunDocument) -> Verdict {
    let recs = kind(doc, "gap");
    let mut bad = Vec::new();
    let mut worst: f64 = 0.0;
    for n in 4..=14 {
        for model in ["parent", "uncle"] {
            let r = recs.iter().find(|r| n_of(r, "n") == n && r.param_str("model") == Some(model));
            match r {
                Some(r) if r.skipped.is_none() && s(r, "null_dim") == 2.0 => {
                    if model == "uncle" {
                        worst = worst.max(s(r, "ghz_distance"));
                        if !(s(r, "ghz_distance") < 1e-8) {
                            bad.push(format!("{model} n={n} distance"));
                        }
                    }
                }
                _ => bad.push(format!("{model} n={n}")),
            }
        }
    }
    verdict("ghz ground spaces", bad.is_empty(), format!("n=4..14 null dim 2, uncle distance <= {worst:.2e}; failures {bad:?}"))
}

fn gap_contrast(doc: &RunDocument) -> Verdict {
    let recs = kind(doc, "gap");
    let series = |model: &str| -> Vec<f64> {
        (6..=14)
            .map(|n| {
                recs.iter()
                    .find(|r| n_of(r, "n") == n && r.param_str("model") == Some(model))
                    .map_or(f64::NAN, |r| s(r, "lambda1"))
            })
            .collect()
    };
    let parent = series("parent");
    let uncle = series("uncle");
    let ratio = parent.iter().copied().fold(f64::INFINITY, f64::min) / parent.iter().copied().fold(0.0, f64::max);
    let halves = uncle[8] < 0.5 * uncle[0];
    verdict(
        "gapped vs gapless",
        ratio > 0.8 && decreasing(&uncle) && halves,
        format!("parent min/max {ratio:.3}; uncle lambda1(6)={:.5} lambda1(14)={:.5}", uncle[0], uncle[8]),
    )
}

fn domain_scaling(doc: &RunDocument) -> Verdict {
    let mut pts: Vec<(f64, f64)> = kind(doc, "domain")
        .iter()
        .filter(|r| n_of(r, "n") == 18 && n_of(r, "window") == 14 && (3..=7).contains(&n_of(r, "r")))
        .map(|r| (n_of(r, "r") as f64 - 1.0, s(r, "rayleigh")))
        .collect();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    let (xs, ys): (Vec<f64>, Vec<f64>) = pts.into_iter().unzip();
    let slope = loglog_fit(&xs, &ys).map_or(f64::NAN, |f| f.0);
    verdict("domain-wall scaling", xs.len() == 5 && (-1.2..=-0.8).contains(&slope), format!("slope {slope:.4} over r=3..7"))
}

fn densification(doc: &RunDocument) -> Verdict {
    let recs = kind(doc, "spectrum");
    let gaps: Vec<f64> = [8, 10, 12]
        .iter()
        .map(|&n| recs.iter().find(|r| n_of(r, "n") == n).map_or(f64::NAN, |r| s(r, "max_spacing_0_2")))
        .collect();
    let counts = [8, 10, 12].iter().all(|&n| recs.iter().any(|r| n_of(r, "n") == n && s(r, "eigen_count") == (1u64 << n) as f64));
    verdict("spectrum densification", counts && decreasing(&gaps), format!("max spacing on [0,2]: {gaps:.5?}"))
}

fn epsilon_limit(doc: &RunDocument) -> Verdict {
    let mut pts: Vec<(f64, f64)> = kind(doc, "distance")
        .iter()
        .filter(|r| r.param_str("perturbation") == Some("generic"))
        .filter_map(|r| Some((r.params.get("eps")?.as_f64()?, s(r, "distance"))))
        .collect();
    pts.sort_by(|a, b| b.0.total_cmp(&a.0));
    let grid_ok = pts.iter().map(|p| p.0).collect::<Vec<_>>() == vec![1e-1, 1e-2, 1e-3, 1e-4];
    let (xs, ys): (Vec<f64>, Vec<f64>) = pts.into_iter().unzip();
    let slope = loglog_fit(&xs, &ys).map_or(f64::NAN, |f| f.0);
    let degenerate = kind(doc, "limit").into_iter().find(|r| r.param_str("perturbation") == Some("degenerate"));
    let (flagged, apart) = degenerate.map_or((false, f64::NAN), |r| (s(r, "degenerate") == 1.0, s(r, "generic_limit_distance")));
    verdict(
        "epsilon limit",
        grid_ok && (slope - 1.0).abs() <= 0.2 && flagged && apart > 0.1,
        format!("slope {slope:.4}; degenerate flagged {flagged}, distance {apart:.3} from the generic limit"),
    )
}

fn toric_closure(doc: &RunDocument) -> Verdict {
    let ground = kind(doc, "ground");
    let ranks: Vec<f64> = ground.iter().map(|r| s(r, "rank")).collect();
    let dist = kind(doc, "comparison").first().map_or(f64::NAN, |r| s(r, "ground_distance"));
    let odd_physical = kind(doc, "odd-patterns").first().map_or(f64::NAN, |r| s(r, "nonzero"));
    let odd_enumerated: f64 = kind(doc, "gf2-oracle").iter().map(|r| s(r, "odd_parity_nonzero")).sum();
    verdict(
        "toric closure",
        ranks.len() == 2 && ranks[0] == ranks[1] && dist < 1e-8 && odd_physical == 0.0 && odd_enumerated == 0.0,
        format!("ranks {ranks:?}, distance {dist:.2e}, odd-parity patterns with nonzero norm {}", odd_physical + odd_enumerated),
    )
}

fn toric_intersection(doc: &RunDocument) -> Verdict {
    let contain = kind(doc, "containment");
    let worst = contain
        .iter()
        .map(|r| r.residuals.get("max_term_norm").copied().unwrap_or(f64::NAN))
        .fold(0.0, f64::max);
    let runs = kind(doc, "alternating");
    let within = runs.iter().filter(|r| s(r, "vanished") == 0.0 && s(r, "distance_to_span") < 1e-6).count();
    verdict(
        "toric intersection",
        contain.len() == 2 && contain.iter().all(|r| s(r, "span_dim") == 1024.0) && worst < 1e-10 && runs.len() == 8 && within == 8,
        format!("containment residual {worst:.2e}; {within}/{} fixed points within 1e-6", runs.len()),
    )
}

fn gf2_oracle(doc: &RunDocument) -> Verdict {
    let oracle = kind(doc, "gf2-oracle");
    let tori = oracle.iter().filter(|r| r.param_str("lattice") == Some("torus")).count();
    let mismatches: f64 = oracle.iter().map(|r| s(r, "mismatches")).sum();
    let small = oracle.iter().all(|r| s(r, "unknowns") <= 24.0);
    let counts = kind(doc, "torus-count");
    let mut formula = 0;
    for rows in 2..=6 {
        for cols in 2..=6 {
            if counts.iter().any(|r| n_of(r, "rows") == rows && n_of(r, "cols") == cols && s(r, "log2_count") == (rows * cols + 1) as f64) {
                formula += 1;
            }
        }
    }
    verdict(
        "gf2 oracle",
        tori >= 7 && mismatches == 0.0 && small && formula == 25,
        format!("{} lattices ({tori} tori), {mismatches} mismatches; NM+1 holds on {formula}/25 tori", oracle.len()),
    )
}

fn energetics(doc: &RunDocument) -> Verdict {
    let mut problems = Vec::new();
    let square = kind(doc, "square");
    match square.first() {
        Some(r) => {
            if s(r, "norm_sqr") != s(r, "pairs") * s(r, "c_squared") || s(r, "c_squared") != 131072.0 {
                problems.push("4x4 norm".to_string());
            }
            if !(s(r, "interior_max_energy") < 1e-12) || s(r, "interior_windows") < 1.0 {
                problems.push("4x4 interior".to_string());
            }
            if !(s(r, "rayleigh") <= 16.0) {
                problems.push("4x4 bound".to_string());
            }
        }
        None => problems.push("4x4 missing".to_string()),
    }
    let strips = kind(doc, "strip");
    let mut by_len: BTreeMap<usize, Vec<(usize, f64)>> = BTreeMap::new();
    for r in &strips {
        let (len, rr) = (n_of(r, "cols"), n_of(r, "r"));
        let bound = 8.0 / rr as f64;
        if (s(r, "bound") - bound).abs() > 1e-12 || !(s(r, "rayleigh") <= bound) {
            problems.push(format!("2x{len} r={rr} bound"));
        }
        if s(r, "norm_sqr") != s(r, "pairs") * s(r, "c_squared") {
            problems.push(format!("2x{len} r={rr} norm"));
        }
        if let Some(p) = r.scalar("physical_norm_sqr") {
            if p != s(r, "pairs") * s(r, "c_squared") || !(r.residuals["reduced_vs_physical"] < 1e-10) {
                problems.push(format!("2x{len} r={rr} physical"));
            }
        }
        by_len.entry(len).or_default().push((rr, s(r, "rayleigh")));
    }
    let physical = strips.iter().filter(|r| r.scalar("physical_rayleigh").is_some()).count();
    for (len, upto) in [(8, 2), (10, 3)] {
        let mut v = by_len.get(&len).cloned().unwrap_or_default();
        v.sort_by_key(|p| p.0);
        let q: Vec<f64> = v.iter().filter(|p| p.0 <= upto).map(|p| p.1).collect();
        if q.len() != upto || !decreasing(&q) {
            problems.push(format!("2x{len} not decreasing: {q:?}"));
        }
    }
    verdict(
        "two-defect energetics",
        problems.is_empty() && physical >= 2,
        format!("{} strip points ({physical} rebuilt physically); problems {problems:?}", strips.len()),
    )
}

fn additivity(doc: &RunDocument) -> Verdict {
    let sums = kind(doc, "sum");
    let ok = !sums.is_empty() && sums.iter().all(|r| n_of(r, "n") >= 16 && s(r, "deviation") <= s(r, "bound"));
    let detail = sums
        .iter()
        .map(|r| format!("n={}: {:.2e} <= {:.3e}", n_of(r, "n"), s(r, "deviation"), s(r, "bound")))
        .collect::<Vec<_>>()
        .join(", ");
    verdict("additivity", ok, detail)
}

fn main() {
    let started = Instant::now();
    let mut docs: BTreeMap<Experiment, RunDocument> = BTreeMap::new();
    for exp in Experiment::ALL {
        let config = ExperimentConfig::defaults(exp);
        let t = Instant::now();
        let outcome = runs::run(&config).unwrap_or_else(|e| panic!("{exp} failed to run: {e}"));
        eprintln!("ran {exp} in {:.1}s", t.elapsed().as_secs_f64());
        docs.insert(exp, runs::document(&config, outcome));
    }
    let verdicts = [
        ghz_ground(&docs[&Experiment::GhzGap]),
        gap_contrast(&docs[&Experiment::GhzGap]),
        domain_scaling(&docs[&Experiment::PhiSweep]),
        densification(&docs[&Experiment::Density]),
        epsilon_limit(&docs[&Experiment::EpsilonLimit]),
        toric_closure(&docs[&Experiment::ToricGround]),
        toric_intersection(&docs[&Experiment::Prop1]),
        gf2_oracle(&docs[&Experiment::ToricGround]),
        energetics(&docs[&Experiment::PhiSweep]),
        additivity(&docs[&Experiment::Additivity]),
    ];
    for (i, v) in verdicts.iter().enumerate() {
        println!("criterion {:>2} {:<24} {}  {}", i + 1, v.name, if v.passed { "PASS" } else { "FAIL" }, v.detail);
    }
    let internal: Vec<String> = docs
        .values()
        .flat_map(|d| d.checks.iter().filter(|c| !c.passed).map(move |c| format!("{}:{}", d.experiment, c.name)))
        .collect();
    if !internal.is_empty() {
        println!("experiment checks failing: {internal:?}");
    }
    let passed = verdicts.iter().filter(|v| v.passed).count();
    println!("{passed}/{} criteria passed in {:.1}s", verdicts.len(), started.elapsed().as_secs_f64());
    if passed != verdicts.len() || !internal.is_empty() {
        std::process::exit(1);
    }
}
