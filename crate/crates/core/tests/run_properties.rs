use chemoflow::diagnostics::CSV_HEADER;
use chemoflow::harness::{run, RunConfig};

fn parse_csv(text: &str) -> Vec<Vec<f64>> {
    text.lines().skip(1).map(|l| l.split(',').map(|v| v.parse().unwrap()).collect()).collect()
}

#[test]
fn gravity_run_keeps_mass_and_oxygen_bound() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = RunConfig::default();
    cfg.grid.cells = [32, 32, 1];
    cfg.time.t_final = 0.5;
    let out = run(&cfg, Some(dir.path())).unwrap();
    let text = std::fs::read_to_string(dir.path().join("diagnostics.csv")).unwrap();
    assert_eq!(text.lines().next().unwrap(), CSV_HEADER);
    let rows = parse_csv(&text);
    assert_eq!(rows.len(), out.records.len());
    let col = |name: &str| CSV_HEADER.split(',').position(|h| h == name).unwrap();
    let (t, mass, c_max) = (col("t"), col("mass"), col("c_max"));
    let m0 = rows[0][mass];
    for w in rows.windows(2) {
        assert!(w[1][t] > w[0][t]);
        assert!((w[1][mass] - m0).abs() <= 1e-12 * m0);
        assert!(w[1][c_max] <= w[0][c_max] + 1e-12);
        let acc = col("A1")..=col("A7");
        assert!(w[1][acc.clone()].iter().zip(&w[0][acc]).all(|(b, a)| b >= a));
    }
    assert_eq!(rows.last().unwrap()[t], 0.5);
    assert!(out.extremes.max_divergence <= 1e-8);
}

#[test]
fn three_dimensional_run_completes() {
    let text = "\
grid.dim = 3
grid.cells = 8, 8, 8
model.phi_grad = 0, 0, -0.1
init.center = 0.5, 0.5, 0.5
init.width = 0.2
time.t_final = 0.002
";
    let cfg = RunConfig::parse(text).unwrap();
    let out = run(&cfg, None).unwrap();
    let first = &out.records[0];
    let last = out.records.last().unwrap();
    assert!((last.mass - first.mass).abs() <= 1e-12 * first.mass);
    assert!(last.c_max <= first.c_max);
    assert!(out.state.n.min() > 0.0);
    assert!(out.state.u.max_abs() > 0.0);
}
