//! End-to-end acceptance run. Prints one PASS/FAIL line per criterion and exits non-zero if any
//! criterion fails. Runs without the libtest harness so the lines always reach the output.

use num_complex::Complex64 as C64;
use sixvertex::bethe::{count_maximal_states, match_solutions, solve_wronskian_system, WronskianOptions};
use sixvertex::closedform::{
    groundstate_check, solve_difference_linear, stroganov_minus, stroganov_plus, HyperSide,
};
use sixvertex::funceq::{
    check_inversion, check_wronskian, check_zero_orbit_sum, operator_suite, OPERATOR_IDENTITIES, OPERATOR_TOL,
};
use sixvertex::lattice::Lattice;
use sixvertex::polynomials::CPoly;
use sixvertex::qcontext::RootContext;
use sixvertex::spectra::{
    degeneracy_groups, p_mu_scaling_error, sector_records, spectrum, Probes, RecordKind, SpectraOptions,
    SpectralRecord,
};
use std::collections::BTreeMap;
use std::time::Instant;

const SEED: u64 = 20240611;
const GRID_SITES: std::ops::RangeInclusive<usize> = 2..=8;
const GRID_ORDERS: [u32; 5] = [3, 4, 5, 6, 8];

type Outcome = sixvertex::Result<(bool, String)>;
type Spectra = BTreeMap<(usize, u32), (Lattice, Vec<SpectralRecord>)>;

fn ctx(n: u32) -> RootContext {
    RootContext::new(n, 1).expect("valid root of unity")
}

fn table_one() -> Outcome {
    // (N, M, maximal states, sector dimension)
    let rows: [(u32, usize, usize, usize); 9] = [
        (3, 3, 1, 3),
        (3, 5, 1, 10),
        (3, 7, 1, 35),
        (3, 9, 1, 126),
        (5, 3, 3, 3),
        (5, 5, 8, 10),
        (5, 7, 21, 35),
        (7, 3, 3, 3),
        (7, 5, 10, 10),
    ];
    let mut bad = Vec::new();
    for (n, m, want, dim) in rows {
        let lat = Lattice::new(ctx(n), m)?;
        let c = count_maximal_states(&lat, &SpectraOptions::default())?;
        if c.from_records != want || c.sector_dim != dim || !c.routes_agree() {
            bad.push(format!("N={n} M={m}: {}/{} kernel {}", c.from_records, c.sector_dim, c.kernel));
        }
    }
    Ok((bad.is_empty(), if bad.is_empty() { format!("{} rows exact, both routes agree", rows.len()) } else { bad.join("; ") }))
}

fn operator_identities() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut count = 0;
    let mut failures = 0;
    let mut seen = std::collections::BTreeSet::new();
    for m in GRID_SITES {
        for n in GRID_ORDERS {
            let lat = Lattice::new(ctx(n), m)?;
            for name in OPERATOR_IDENTITIES {
                let reps = operator_suite(&lat, 5, SEED, OPERATOR_TOL, Some(name))?;
                if !reps.is_empty() {
                    seen.insert(*name);
                }
                for r in reps {
                    count += 1;
                    worst = worst.max(r.rel_residual);
                    failures += usize::from(!r.pass);
                }
            }
        }
    }
    let all_families = seen.len() == OPERATOR_IDENTITIES.len();
    Ok((
        failures == 0 && all_families,
        format!("{count} residuals, {failures} over 1e-9, worst {worst:.2e}, {} of {} families", seen.len(), OPERATOR_IDENTITIES.len()),
    ))
}

fn normalization(spectra: &Spectra) -> Outcome {
    let mut worst: f64 = 0.0;
    let mut bad = 0;
    let mut total = 0;
    for (lat, records) in spectra.values() {
        for r in records {
            total += 1;
            worst = worst.max(r.normalization.rel_error);
            if !r.normalization.degree_law || r.normalization.rel_error >= 1e-9 || r.flagged() {
                bad += 1;
                eprintln!("  normalization: M={} N={} Sz={} #{} {:?}", lat.sites(), lat.ctx().order(), r.sz(), r.index, r.normalization);
            }
        }
    }
    Ok((bad == 0, format!("{total} eigenvectors, {bad} violations, worst Q(0) error {worst:.2e}")))
}

fn factorization(spectra: &Spectra) -> Outcome {
    let mut worst_scaling: f64 = 0.0;
    let mut groups = 0;
    let mut bad = Vec::new();
    for m in [4, 6, 8] {
        for n in [3, 4] {
            let (lat, records) = &spectra[&(m, n)];
            let probes = Probes::new(lat.ctx());
            for g in degeneracy_groups(records, lat.ctx()) {
                groups += 1;
                if !g.law_holds {
                    bad.push(format!("M={m} N={n} group {} multiplicity {}", g.group, g.multiplicity));
                }
            }
            for r in records {
                let e = p_mu_scaling_error(r, &probes);
                worst_scaling = worst_scaling.max(e);
                if e >= 1e-8 {
                    bad.push(format!("M={m} N={n} Sz={} #{} P_mu scaling {e:.2e}", r.sz(), r.index));
                }
            }
        }
    }
    let mut odd_records = 0;
    for m in [3, 5, 7] {
        for n in [4, 8] {
            let (_, records) = &spectra[&(m, n)];
            for r in records {
                odd_records += 1;
                let deg_minus = r.q_minus.degree();
                let want = (m as i64 + r.two_sz) / 2;
                if r.n_strings() != 0 || r.n_inf != 0 || deg_minus != m as isize - r.n_plus() as isize || deg_minus as i64 != want {
                    bad.push(format!("M={m} N={n} Sz={} #{}: n_S={} n_inf={} deg Q-={deg_minus}", r.sz(), r.index, r.n_strings(), r.n_inf));
                }
            }
        }
    }
    Ok((
        bad.is_empty(),
        if bad.is_empty() {
            format!("{groups} even-M groups obey 2^n_S, worst P_mu scaling {worst_scaling:.2e}, {odd_records} odd-M records string-free")
        } else {
            bad.join("; ")
        },
    ))
}

fn wronskian_suite(spectra: &Spectra) -> Outcome {
    let mut zero_cases = 0;
    let mut nonzero_cases = 0;
    let mut worst_coeff: f64 = 0.0;
    let mut worst_inv: f64 = 0.0;
    let mut bad = Vec::new();
    for ((m, n), (lat, records)) in spectra {
        let c = lat.ctx();
        let expect_nonzero = m % 2 == 1 && c.q_n_prime_sign() < 0.0;
        let t1 = CPoly::linear_power(c.q_pow(2), C64::new(-1.0, 0.0), *m);
        for r in records {
            let w = check_wronskian(lat, r, 1, &t1, 1e-8);
            let factor = w.args[0].1.norm();
            // q^s is measured, so a vanishing factor is zero only to roughly 1e-11; a nonzero one is O(1).
            let nonzero = factor > 0.1;
            if nonzero != expect_nonzero || (!nonzero && factor > 1e-8) {
                bad.push(format!("M={m} N={n} Sz={} #{}: right-side factor {factor:.2e}", r.sz(), r.index));
                continue;
            }
            if nonzero {
                nonzero_cases += 1;
                worst_coeff = worst_coeff.max(w.rel_residual);
                let inv = check_inversion(lat, r, 1e-7);
                worst_inv = inv.iter().map(|x| x.rel_residual).fold(worst_inv, f64::max);
                if !w.pass || inv.iter().any(|x| !x.pass) || inv.len() != 2 {
                    bad.push(format!("M={m} N={n} Sz={} #{}: Wronskian {:.2e}", r.sz(), r.index, w.rel_residual));
                }
            } else {
                zero_cases += 1;
                if !w.pass {
                    bad.push(format!("M={m} N={n} Sz={} #{}: left side {:.2e}", r.sz(), r.index, w.rel_residual));
                }
            }
        }
    }
    Ok((
        bad.is_empty() && nonzero_cases > 0,
        if bad.is_empty() {
            format!("{zero_cases} vanishing, {nonzero_cases} nonzero; worst coefficient {worst_coeff:.2e}, worst inversion {worst_inv:.2e}")
        } else {
            bad.join("; ")
        },
    ))
}

fn solver_cell(n: u32, m: usize) -> sixvertex::Result<(bool, String)> {
    let c = ctx(n);
    let lat = Lattice::new(c, m)?;
    let run = solve_wronskian_system(&c, m, 1, &WronskianOptions { seed: SEED, ..Default::default() })?;
    let (_, records) = sector_records(&lat, lat.sector(1)?, &Probes::new(&c), &SpectraOptions::default())?;
    let matched = match_solutions(&run.solutions, &records, 1e-6).iter().filter(|h| h.record.is_some()).count();
    let worst = run.solutions.iter().map(|s| s.max_bae()).fold(0.0, f64::max);
    let ok = run.solutions.len() == records.len() && matched == records.len() && worst < 1e-8;
    Ok((ok, format!("N={n} M={m} {}/{} bae {worst:.1e}", run.solutions.len(), records.len())))
}

fn wronskian_solver() -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();
    for n in [6, 10] {
        for m in [3, 5, 7] {
            let (pass, d) = solver_cell(n, m)?;
            ok &= pass;
            parts.push(d);
        }
    }
    for n in [6, 10] {
        let (pass, d) = solver_cell(n, 9)?;
        parts.push(format!("{d} (stretch, {})", if pass { "pass" } else { "fail" }));
    }
    Ok((ok, parts.join(", ")))
}

fn closed_forms() -> Outcome {
    let c = ctx(3);
    let mut bad = Vec::new();
    let mut worst: f64 = 0.0;
    for m in 0..=6 {
        for side in [HyperSide::Plus, HyperSide::Minus] {
            let hyper = match side {
                HyperSide::Plus => stroganov_plus(m, &c)?,
                HyperSide::Minus => stroganov_minus(m, &c)?,
            };
            let linear = solve_difference_linear(2 * m + 1, side, &c)?;
            let d = hyper.q_poly.rel_distance(&linear.solution.q_poly);
            worst = worst.max(d);
            if d >= 1e-10 || linear.nullity != 1 || hyper.coefficients != linear.solution.coefficients {
                bad.push(format!("m={m} {side:?}: distance {d:.2e} nullity {}", linear.nullity));
            }
        }
    }
    let mut ground = Vec::new();
    for m in 1..=4 {
        let g = groundstate_check(m, &c, &SpectraOptions::default())?;
        let ok = g.energy_error() < 1e-9
            && g.transfer_error < 1e-9
            && g.kernel_records == 1
            && g.kernel_dimension == 1
            && g.kernel_margin < 1.0;
        if !ok {
            bad.push(format!("M={}: {g:?}", g.sites));
        }
        ground.push(format!("M={} |E+M| {:.1e}", g.sites, g.energy_error()));
    }
    Ok((
        bad.is_empty(),
        if bad.is_empty() { format!("m<=6 agree (worst {worst:.1e}); {}", ground.join(", ")) } else { bad.join("; ") },
    ))
}

fn zero_orbit_sum() -> Outcome {
    let c = ctx(3);
    let lat = Lattice::new(c, 5)?;
    let (_, records) = sector_records(&lat, lat.sector(1)?, &Probes::new(&c), &SpectraOptions::default())?;
    let kernel: Vec<_> = records.iter().filter(|r| r.kind == RecordKind::Kernel).collect();
    if kernel.len() != 1 {
        return Ok((false, format!("{} maximal singlets instead of one", kernel.len())));
    }
    let r = check_zero_orbit_sum(&lat, kernel[0], 1e-8);
    Ok((r.pass, format!("relative residual {:.2e} on {} points", r.rel_residual, sixvertex::funceq::GRID_POINTS)))
}

fn build_spectra() -> sixvertex::Result<Spectra> {
    let mut out = BTreeMap::new();
    for m in GRID_SITES {
        for n in GRID_ORDERS {
            let lat = Lattice::new(ctx(n), m)?;
            let records = spectrum(&lat, &SpectraOptions::default())?;
            out.insert((m, n), (lat, records));
        }
    }
    Ok(out)
}

fn main() {
    let start = Instant::now();
    let spectra = build_spectra();
    let shared = |f: fn(&Spectra) -> Outcome| -> Outcome {
        match &spectra {
            Ok(s) => f(s),
            Err(e) => Err(e.clone()),
        }
    };
    type Criterion<'a> = (&'static str, Box<dyn Fn() -> Outcome + 'a>);
    let criteria: Vec<Criterion> = vec![
        ("maximal-state counts", Box::new(table_one)),
        ("operator identities", Box::new(operator_identities)),
        ("degree and normalization laws", Box::new(|| shared(normalization))),
        ("factorization and degeneracy", Box::new(|| shared(factorization))),
        ("quantum Wronskian and inversion", Box::new(|| shared(wronskian_suite))),
        ("Wronskian-system solver", Box::new(wronskian_solver)),
        ("N=3 closed forms and groundstate", Box::new(closed_forms)),
        ("vanishing orbit sum", Box::new(zero_orbit_sum)),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let (pass, detail) = run().unwrap_or_else(|e| (false, format!("error: {e}")));
        failed += usize::from(!pass);
        println!(
            "acceptance {} {:<34} {}  ({detail}; {:.1}s)",
            i + 1,
            name,
            if pass { "PASS" } else { "FAIL" },
            t.elapsed().as_secs_f64()
        );
    }
    println!("acceptance: {} of {} criteria pass in {:.1}s", criteria.len() - failed, criteria.len(), start.elapsed().as_secs_f64());
    if failed > 0 {
        std::process::exit(1);
    }
}
