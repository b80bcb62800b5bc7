use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use extem::angular_momentum::{decompose, FluxReport};
use extem::index_algebra::IndexList;
use extem_cli::emit::emitter;
use extem_cli::run::{run_decompose, run_verify};
use extem_cli::ScenarioConfig;

const BASE: &str = r#"
seed = 11

[signature]
k = 1
n = 3

[field]
r = 2
ell = 0

[packet]
center = [0.3, -0.2, 1.0]
spread = 0.1
points = [6, 6, 6]
offset = [0.1, 0.0, -0.2]

[flux]
x_ell = 0.4
alpha = [0.0, 0.5, -0.25, 0.75]
alpha_sweep = [0.0, 1.0, -2.0]

[lattice]
half_sigmas = 5.0
points = [12, 12, 12]

[verify]
trials = 100
points = 10
"#;

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let p = dir.join("scenario.toml");
    fs::write(&p, text).unwrap();
    p
}

fn extem(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_extem")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn verify(text: &str) -> Output {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), text);
    extem(&["verify", "--config", cfg.to_str().unwrap()])
}

#[test]
fn default_scenario_passes_every_check() {
    let o = verify(BASE);
    assert_eq!(o.status.code(), Some(0), "{}{}", stdout(&o), stderr(&o));
    let out = stdout(&o);
    assert_eq!(out.lines().filter(|l| l.starts_with("PASS")).count(), 9, "{out}");
    assert!(out.lines().all(|l| l.contains("max_residual=")));
}

#[test]
fn off_shell_mode_fails_maxwell() {
    let o = verify(&BASE.replace("\nell = 0\n", "\nell = 0\noff_shell = true\n"));
    assert_eq!(o.status.code(), Some(1));
    let out = stdout(&o);
    assert!(out.lines().any(|l| l.starts_with("FAIL maxwell")), "{out}");
    assert!(out.lines().any(|l| l.starts_with("FAIL conservation")), "{out}");
    assert!(out.lines().any(|l| l.starts_with("PASS divergence_identity")), "{out}");
}

#[test]
fn suites_select_checks() {
    let o = verify(&BASE.replace("seed = 11", "seed = 11\nsuites = [\"gauge\", \"interior_identities\"]"));
    assert_eq!(o.status.code(), Some(0));
    let names: Vec<String> = stdout(&o).lines().map(|l| l.split_whitespace().nth(1).unwrap().to_string()).collect();
    assert_eq!(names, ["interior_identities", "gauge"]);
}

#[test]
fn config_errors_exit_two_with_field_names() {
    let cases = [
        (BASE.replace("seed = 11", ""), "seed"),
        (BASE.replace("r = 2", "r = 1"), "field.r"),
        (BASE.replace("spread = 0.1", "spread = 0.0"), "packet.spread"),
        (BASE.replace("points = [6, 6, 6]", "points = [6, 6]"), "packet.points"),
        (BASE.replace("[verify]", "[verify]\ncolour = 3"), "colour"),
        (BASE.replace("\nell = 0\n", "\nell = 3\n"), "packet.center"),
        ("seed = ".to_string(), "line 1"),
    ];
    for (text, needle) in cases {
        let o = verify(&text);
        assert_eq!(o.status.code(), Some(2), "{needle}: {}", stderr(&o));
        assert!(stderr(&o).contains(needle), "{needle}: {}", stderr(&o));
    }
    let o = extem(&["verify", "--config", "/nonexistent/scenario.toml"]);
    assert_eq!(o.status.code(), Some(2));
    let o = extem(&["verify"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn runtime_errors_exit_three() {
    let dir = tempfile::tempdir().unwrap();
    let o = extem(&["report", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    let cfg = write_config(dir.path(), BASE);
    let blocker = dir.path().join("file");
    fs::write(&blocker, "x").unwrap();
    let o = extem(&["decompose", "--config", cfg.to_str().unwrap(), "--out", blocker.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
}

const ZERO_POLARIZATION: &str = "polarization_re = [0.0, 0.0, 0.0, 0.0]\npolarization_im = [0.0, 0.0, 0.0, 0.0]\n";

#[test]
fn empty_field_passes_trivially_with_warning() {
    let text = BASE.replace("[flux]", &format!("{ZERO_POLARIZATION}\n[flux]"));
    let o = verify(&text);
    assert_eq!(o.status.code(), Some(0));
    assert!(stderr(&o).contains("empty field"), "{}", stderr(&o));
    assert!(stdout(&o).lines().any(|l| l.contains("maxwell") && l.contains("(empty field)")));
}

#[test]
fn zero_seed_gives_all_zero_report() {
    let text = BASE.replace("[flux]", &format!("{ZERO_POLARIZATION}\n[flux]"));
    let dir = tempfile::tempdir().unwrap();
    let cfg = ScenarioConfig::from_toml(&text).unwrap();
    let s = run_decompose(&cfg, dir.path(), emitter("csv").unwrap()).unwrap();
    assert!(s.warnings.iter().any(|w| w.contains("empty field")));
    let recs = emitter("csv").unwrap().read(&mut fs::File::open(dir.path().join("flux_report.csv")).unwrap()).unwrap();
    for (label, v) in recs {
        if ["Pi[", "Omega[", "N[", "L[", "S["].iter().any(|p| label.starts_with(p)) {
            assert_eq!(v, 0.0, "{label}");
        }
    }
}

fn dir_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).unwrap())
        })
        .collect();
    v.sort();
    v
}

#[test]
fn outputs_are_identical_across_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), BASE);
    for format in ["csv", "json-lines"] {
        let mut runs = Vec::new();
        for threads in ["1", "3", "8"] {
            let out = dir.path().join(format!("{format}-{threads}"));
            let o = extem(&[
                "decompose",
                "--config",
                cfg.to_str().unwrap(),
                "--out",
                out.to_str().unwrap(),
                "--format",
                format,
                "--threads",
                threads,
            ]);
            assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
            runs.push(dir_bytes(&out));
        }
        assert_eq!(runs[0].len(), 5);
        assert!(runs.windows(2).all(|w| w[0] == w[1]), "{format}");
    }
}

#[test]
fn seed_override_changes_random_polarization() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), BASE);
    let run = |seed: &str, name: &str| {
        let out = dir.path().join(name);
        let o =
            extem(&["decompose", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "--seed", seed]);
        assert_eq!(o.status.code(), Some(0));
        fs::read(out.join("flux_report.csv")).unwrap()
    };
    assert_eq!(run("5", "a"), run("5", "b"));
    assert_ne!(run("5", "a"), run("6", "c"));
}

#[test]
fn json_lines_round_trip_through_report_parser() {
    let cfg = ScenarioConfig::from_toml(BASE).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let e = emitter("json-lines").unwrap();
    run_decompose(&cfg, dir.path(), e).unwrap();
    let recs = e.read(&mut fs::File::open(dir.path().join("flux_report.jsonl")).unwrap()).unwrap();
    let parsed = FluxReport::from_records(&recs).unwrap();
    let (ms, _) = cfg.build_modes().unwrap();
    let direct = decompose(&ms, cfg.flux.x_ell, &cfg.alpha()).unwrap();
    let (a, b) = (parsed.records(), direct.records());
    assert_eq!(a.len(), b.len());
    for ((la, va), (lb, vb)) in a.iter().zip(&b) {
        assert_eq!(la, lb);
        assert_eq!(va.to_bits(), vb.to_bits(), "{la}");
    }
    let text = fs::read_to_string(dir.path().join("modes.txt")).unwrap();
    assert_eq!(extem::field_config::ModeSet::parse(&text).unwrap().to_text(), text);
}

#[test]
fn report_prints_closed_decomposition() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), BASE);
    let out = dir.path().join("run");
    let out = out.to_str().unwrap();
    assert_eq!(extem(&["decompose", "--config", cfg.to_str().unwrap(), "--out", out]).status.code(), Some(0));
    let o = extem(&["report", "--out", out]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert!(text.contains("signature (1, 3)"));
    let resid: f64 = text.lines().find_map(|l| l.strip_prefix("closure residual ")).unwrap().trim().parse().unwrap();
    assert!(resid < 1e-15, "{text}");
}

#[test]
fn flux_needs_a_lattice() {
    let dir = tempfile::tempdir().unwrap();
    let text = BASE.split("[lattice]").next().unwrap().to_string() + "[verify]\ntrials = 5\n";
    let cfg = write_config(dir.path(), &text);
    let out = dir.path().join("o");
    let o = extem(&["flux", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    let cfg = write_config(dir.path(), BASE);
    let o = extem(&["flux", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert!(out.join("realspace.csv").exists() && !out.join("flux_report.csv").exists());
}

#[test]
fn tight_lattice_warns() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &BASE.replace("half_sigmas = 5.0", "half_sigmas = 1.0"));
    let out = dir.path().join("o");
    let o = extem(&["flux", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stderr(&o).contains("warning"), "{}", stderr(&o));
}

fn records_of(path: &Path) -> Vec<(String, f64)> {
    emitter("csv").unwrap().read(&mut fs::File::open(path).unwrap()).unwrap()
}

fn get(recs: &[(String, f64)], label: &str) -> f64 {
    recs.iter().find(|(l, _)| l == label).unwrap_or_else(|| panic!("{label}")).1
}

/// `Ω(s α) − Ω(0) = −(s α)∧Π` read back from the sweep table, with the wedge
/// of two vectors written out as `a_i b_j − a_j b_i`.
#[test]
fn alpha_sweep_differences_follow_shift_law() {
    let cfg = ScenarioConfig::from_toml(BASE).unwrap();
    let dir = tempfile::tempdir().unwrap();
    run_decompose(&cfg, dir.path(), emitter("csv").unwrap()).unwrap();
    let rep = records_of(&dir.path().join("flux_report.csv"));
    let sweep = records_of(&dir.path().join("alpha_sweep.csv"));
    let pi: Vec<f64> = (0..4).map(|t| get(&rep, &format!("Pi[{t}]"))).collect();
    let scale = pi.iter().fold(0.0f64, |a, p| a.max(p.abs()));
    for i in 1..3 {
        for (a, b) in [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)] {
            let da: Vec<f64> = (0..4)
                .map(|t| get(&sweep, &format!("sweep[{i}].alpha[{t}]")) - get(&sweep, &format!("sweep[0].alpha[{t}]")))
                .collect();
            let label = |k: usize| format!("sweep[{k}].Omega[{a},{b}]");
            let diff = get(&sweep, &label(i)) - get(&sweep, &label(0));
            let expect = -(da[a] * pi[b] - da[b] * pi[a]);
            assert!((diff - expect).abs() <= 1e-12 * scale * 4.0, "sweep {i} pair ({a},{b}): {diff} vs {expect}");
        }
        assert!(get(&sweep, &format!("sweep[{i}].shift_residual")) <= 1e-12);
    }
}

/// A circularly polarized packet along `x3` carries spin `S_12`, and as the
/// spread shrinks `S_12/Π_0` tends to the single-mode value `−1/(2π χ₀)`.
#[test]
fn circular_packet_approaches_single_mode_limit() {
    let chi0 = 1.5;
    let expect = -1.0 / (2.0 * std::f64::consts::PI * chi0);
    let mut errors = Vec::new();
    for spread in [0.2, 0.1, 0.05, 0.025] {
        let text = format!(
            "seed = 1\n[signature]\nk = 1\nn = 3\n[field]\nr = 2\nell = 0\n[packet]\ncenter = [0.0, 0.0, {chi0}]\n\
             spread = {spread}\npoints = [9, 9, 9]\n\
             polarization_re = [0.0, 0.7071067811865476, 0.0, 0.0]\npolarization_im = [0.0, 0.0, -0.7071067811865476, 0.0]\n"
        );
        let cfg = ScenarioConfig::from_toml(&text).unwrap();
        let (ms, _) = cfg.build_modes().unwrap();
        let rep = decompose(&ms, 0.0, &[0.0; 4]).unwrap();
        let s12 = rep.s_part.get(IndexList::pair(1, 2).unwrap()).re;
        for (p, c) in rep.s_part.iter() {
            if p != IndexList::pair(1, 2).unwrap() {
                assert!(c.norm() <= 1e-12 * s12.abs(), "spread {spread} pair {p}");
            }
        }
        let ratio = s12 / rep.pi_part.coeffs()[0].re;
        errors.push((ratio - expect).abs() / expect.abs());
    }
    for w in errors.windows(2) {
        assert!(w[1] < w[0], "{errors:?}");
    }
    assert!(errors[3] < 1e-3, "{errors:?}");
}

#[test]
fn library_verify_matches_binary_exit() {
    let cfg = ScenarioConfig::from_toml(BASE).unwrap();
    assert!(run_verify(&cfg).unwrap().passed());
}
