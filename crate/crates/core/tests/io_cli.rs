use std::path::Path;
use std::process::Command;

use aoflow::io::vtu::render_vtu;
use aoflow::io::{
    cmd_convergence, cmd_energy, cmd_step, Experiment, MeshSpec, RunConfig, CONVERGENCE_HEADER, ENERGY_HEADER,
    STEP_HEADER,
};
use aoflow::mesh::{Domain, MeshKind};
use aoflow::schemes::SchemeKind;
use aoflow::space::Space;

fn config(text: &str, e: Experiment) -> RunConfig {
    RunConfig::parse(text, Some(e)).unwrap()
}

fn read(path: &Path) -> String {
    std::fs::read_to_string(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

fn aoflow() -> Command {
    Command::new(env!("CARGO_BIN_EXE_aoflow"))
}

#[test]
fn defaults_per_experiment() {
    let c = config("", Experiment::Convergence);
    assert_eq!(c.schemes, vec![SchemeKind::GaVms]);
    assert_eq!(c.refinement, vec![8, 16, 32, 64]);
    let e = config("", Experiment::Energy);
    assert_eq!(e.nu, [1.5e-3, 1e-4]);
    assert_eq!(e.mesh, MeshSpec::TwoSquare { n: 32 });
    let s = config("", Experiment::Step);
    assert_eq!(s.nu, [5e-4, 5e-3]);
    assert_eq!(s.kappa, 2.45e-3);
    assert_eq!(s.t_end, 40.0);
    assert!(matches!(s.mesh, MeshSpec::Step { h } if (0.1..=0.14).contains(&h)));
}

#[test]
fn config_overrides_and_errors() {
    let c = config("scheme = ga, twm-vms\nnu_t = 0.02\nrefinement = 4, 8\n# comment\n\nkappa=0.5", Experiment::Convergence);
    assert_eq!(c.schemes, vec![SchemeKind::Ga, SchemeKind::TwmVms]);
    assert_eq!(c.refinement, vec![4, 8]);
    assert_eq!(c.kappa, 0.5);
    let sc = c.scheme_config(SchemeKind::Ga, 4, 0.3);
    assert_eq!(sc.dt, 0.25);
    assert_eq!(sc.nu_t, 0.02);

    for bad in [
        "nu1 = -1",
        "colour = red",
        "scheme = foo",
        "refinement = 8, 0",
        "mesh.kind = step",
        "experiment = energy",
        "dt = 0.3",
        "nu1 = nan",
        "just text",
    ] {
        assert!(RunConfig::parse(bad, Some(Experiment::Convergence)).is_err(), "{bad}");
    }
    assert!(RunConfig::parse("", None).is_err());
    assert!(RunConfig::parse("experiment = step", None).is_ok());
}

#[test]
fn single_level_convergence_table() {
    let dir = tempfile::tempdir().unwrap();
    let c = config("refinement = 4\nscheme = ga", Experiment::Convergence);
    let out = cmd_convergence(&c, dir.path()).unwrap();
    assert_eq!(out[0].1.rows.len(), 1);
    let csv = read(&dir.path().join("ga/convergence.csv"));
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], CONVERGENCE_HEADER);
    assert_eq!(lines.len(), 2);
    let fields: Vec<&str> = lines[1].split(',').collect();
    assert_eq!(fields.len(), 8);
    assert_eq!(fields[0], "4");
    assert_eq!((fields[4], fields[6], fields[7]), ("", "", "ok"));
}

#[test]
fn energy_smoke_run() {
    let dir = tempfile::tempdir().unwrap();
    let c = config("mesh.n = 4\nt_end = 0.01", Experiment::Energy);
    let out = cmd_energy(&c, dir.path()).unwrap();
    assert_eq!(out.len(), 2);
    for s in ["ga", "ga-vms"] {
        let csv = read(&dir.path().join(s).join("energy.csv"));
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], ENERGY_HEADER);
        assert_eq!(lines.len(), 3, "{csv}");
        assert!(lines[1].starts_with("0,"));
        assert_eq!(lines[2].split(',').count(), 8);
    }
    let summary = read(&dir.path().join("energy_summary.csv"));
    assert_eq!(summary.lines().count(), 3);
}

/// Without inflow nothing moves; snapshots are written every 100 steps.
#[test]
fn step_without_inflow_and_snapshot_count() {
    let dir = tempfile::tempdir().unwrap();
    let c = config("inflow.max = 0\nt_end = 10\nsnapshot.every = 100\nscheme = ga-vms", Experiment::Step);
    let out = cmd_step(&c, dir.path()).unwrap();
    let o = &out[0];
    assert_eq!(o.blowup, None);
    assert!(o.trace.norms.iter().flatten().all(|v| *v == 0.0));
    assert_eq!(o.snapshots.len(), 2 * 10);
    assert_eq!(std::fs::read_dir(dir.path().join("ga-vms")).unwrap().filter(|e| {
        e.as_ref().unwrap().path().extension().is_some_and(|x| x == "vtu")
    }).count(), 20);
    assert!(dir.path().join("ga-vms/atm_001000.vtu").exists());
    let csv = read(&dir.path().join("ga-vms/step.csv"));
    assert_eq!(csv.lines().next(), Some(STEP_HEADER));
    assert_eq!(csv.lines().count(), 1 + 1001);
    assert!(csv.lines().skip(1).all(|l| l.ends_with(",0")));
}

#[test]
fn vtu_points_round_trip() {
    let space = Space::new(aoflow::mesh::generate_step_mesh(0.14).unwrap());
    assert_eq!(space.mesh().kind, MeshKind::Step);
    let ds = space.domain(Domain::Atmosphere);
    let u = vec![0.0; ds.n_velocity_dofs()];
    let p = vec![0.0; ds.n_pressure_dofs()];
    let s = render_vtu(ds, &u, &p);
    assert!(s.contains(&format!("NumberOfPoints=\"{}\" NumberOfCells=\"{}\"", ds.n_vertices, ds.n_triangles())));
    let arrays: Vec<&str> = s.split("<DataArray").skip(1).collect();
    let numbers = |a: &str| -> Vec<f64> {
        let body = &a[a.find('>').unwrap() + 1..a.find("</DataArray>").unwrap()];
        body.split_whitespace().map(|x| x.parse().unwrap()).collect()
    };
    assert_eq!(numbers(arrays[0]), vec![0.0; 3 * ds.n_vertices]);
    assert_eq!(numbers(arrays[1]), vec![0.0; ds.n_vertices]);
    let pts = numbers(arrays[2]);
    for (k, x) in ds.node_coords[..ds.n_vertices].iter().enumerate() {
        assert_eq!(pts[3 * k], x[0]);
        assert_eq!(pts[3 * k + 1], x[1]);
    }
}

#[test]
fn cli_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.cfg");
    std::fs::write(&cfg, "refinement = 2, 4\n").unwrap();
    let out = aoflow()
        .args(["convergence", "--scheme", "twm", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("twm"));
    assert_eq!(read(&dir.path().join("twm/convergence.csv")).lines().count(), 3);

    std::fs::write(&cfg, "kappa = -1\n").unwrap();
    let out = aoflow().arg("energy").arg("--config").arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("kappa"));

    let out = aoflow().args(["energy", "--scheme", "nope"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));

    let out = aoflow().arg("energy").arg("--config").arg(dir.path().join("missing.cfg")).output().unwrap();
    assert_eq!(out.status.code(), Some(2));

    let out = aoflow().arg("bogus").output().unwrap();
    assert!(!out.status.success());
}
