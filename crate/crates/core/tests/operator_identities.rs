use sixvertex::funceq::{operator_suite, OPERATOR_TOL};
use sixvertex::lattice::Lattice;
use sixvertex::qcontext::RootContext;

fn run(sites: usize, n: u32, m: u32) {
    let lat = Lattice::new(RootContext::new(n, m).unwrap(), sites).unwrap();
    let reports = operator_suite(&lat, 2, 7, OPERATOR_TOL, None).unwrap();
    let bad: Vec<_> = reports.iter().filter(|r| !r.pass).collect();
    for r in &reports {
        eprintln!("M={sites} N={n} m={m} {:<28} rel={:.2e}", r.identity, r.rel_residual);
    }
    assert!(bad.is_empty(), "failing identities: {bad:#?}");
}

#[test]
fn small_chains_all_roots() {
    for (n, m) in [(3, 1), (4, 1), (5, 2), (6, 1), (8, 3)] {
        for sites in [3, 4] {
            run(sites, n, m);
        }
    }
}

#[test]
fn five_sites_order_five() {
    run(5, 5, 1);
}
