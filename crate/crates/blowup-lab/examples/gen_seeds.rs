//! Regenerates the fuzz corpus seeds from the library's own writers.

use blowup_lab::interp::UniformAxis;
use blowup_lab::io;
use blowup_lab::wave::{FieldState, GridKind, Snapshot};
use std::path::Path;

fn main() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fuzz/corpus");
    let snap = Snapshot {
        kind: GridKind::Line,
        dim: 1,
        axis: UniformAxis::new(-0.5, 0.125, 9),
        state: FieldState {
            t: 0.125,
            u: (0..9).map(|i| (i as f64 * 0.4).sin()).collect(),
            ut: (0..9).map(|i| (i as f64 * 0.2).cos()).collect(),
        },
    };
    std::fs::write(
        root.join("snapshot_csv/seed1.csv"),
        io::write_snapshot_csv(&snap),
    )
    .unwrap();
    std::fs::write(
        root.join("snapshot_bin/seed1.bin"),
        io::write_snapshot_bin(&snap),
    )
    .unwrap();

    let wfile = io::WStateFile {
        s: 2.5,
        x0: 0.0,
        t0: 0.25,
        p: 3.0,
        a: 2.0,
        y: vec![-0.9, -0.45, 0.0, 0.45, 0.9],
        w: vec![1.2, 1.35, 1.41, 1.35, 1.2],
        ws: vec![0.01, 0.0, -0.01, 0.0, 0.01],
    };
    std::fs::write(
        root.join("wstate_csv/seed1.csv"),
        io::write_wstate_csv(&wfile),
    )
    .unwrap();

    let cfg = blowup_lab::config::example_run_config();
    std::fs::write(root.join("run_config/seed1.json"), cfg.to_json()).unwrap();
    let sweep = r#"{"schema":1,"base":SUB,"axes":{"a":[1.5,2.0]},"parallelism":2,"cap":8}"#
        .replace("SUB", &cfg.to_json());
    std::fs::write(root.join("run_config/seed2.json"), sweep).unwrap();

    let report = blowup_lab::energy::EnergyReport {
        s: 2.0,
        e0: 1.3333,
        i: -0.01,
        j: 0.001,
        e: 1.3243,
        h: 91.2,
        d: 0.02,
        sigma01: 0.3,
        sigma02: -0.24,
        lp1: 5.33,
        h1_norm: 2.0,
        l2_ws: 0.1,
        theta: 0.0,
    };
    std::fs::write(
        root.join("report_csv/seed1.csv"),
        io::write_energy_csv(&[report]),
    )
    .unwrap();
    std::fs::write(
        root.join("report_csv/seed2.csv"),
        io::write_surface_csv(
            &[-0.1, 0.0, 0.1],
            &[0.21, 0.2, f64::INFINITY],
            &[0.1, 0.1, f64::NAN],
        ),
    )
    .unwrap();
    println!("seeds written");
}
