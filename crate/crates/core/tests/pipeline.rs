use l2dens::density::{DensityModel, DensitySpec};
use l2dens::grid::BandwidthGrid;
use l2dens::kernel::KernelSet;
use l2dens::oracle::{Oracle, OracleOptions};
use l2dens::selector::run;
use l2dens::sim::draw_sample;

#[test]
fn estimates_are_close_to_the_truth() {
    for (name, d) in [("gaussian", 1), ("mixture", 1), ("gaussian", 2)] {
        let f = DensityModel::new(&DensitySpec::parse(name, d, &[]).unwrap()).unwrap();
        let truth = f.l2_sq_exact().unwrap().sqrt();
        let k = KernelSet::new(2, d).unwrap();
        let s = draw_sample(&f, 1500, 99).unwrap();
        let rep = run(&s, &k, 2.0, d == 1).unwrap();
        let err = (rep.estimate() - truth).abs();
        assert!(err < 0.1 * truth, "{name} d={d}: estimate {} vs {truth}", rep.estimate());
    }
}

#[test]
fn oracle_identity_for_two_dimensional_densities() {
    let k = KernelSet::new(2, 2).unwrap();
    let g = BandwidthGrid::new(60, 2).unwrap();
    for name in ["laplace", "triangular"] {
        let f = DensityModel::new(&DensitySpec::parse(name, 2, &[]).unwrap()).unwrap();
        let mut o = Oracle::new(&f, &k).unwrap();
        let rep = o.report(&g, 1.0, OracleOptions::risk_only()).unwrap();
        for row in &rep.rows {
            assert!((row.mean_n + row.bias_sq - rep.l2_sq).abs() < 1e-8, "{name} {:?}", row.exponents);
            assert!(row.frak_b * row.frak_b >= 0.0);
        }
        assert!(rep.o_star > rep.remainder);
    }
}
