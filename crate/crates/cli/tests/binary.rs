use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

fn workdir(name: &str) -> PathBuf {
    let d = Path::new(env!("CARGO_TARGET_TMPDIR")).join("fdl_cli").join(name);
    let _ = fs::remove_dir_all(&d);
    fs::create_dir_all(&d).unwrap();
    d
}

fn write_cfg(dir: &Path, body: &str) -> PathBuf {
    let p = dir.join("run.cfg");
    fs::write(&p, format!("{body}\n[output]\ndir = {}\n", dir.join("out").display())).unwrap();
    p
}

fn fdl(sub: &str, cfg: &Path) -> (i32, String, String) {
    let o = Command::new(env!("CARGO_BIN_EXE_fdl")).arg(sub).arg(cfg).output().unwrap();
    (
        o.status.code().unwrap_or(-1),
        String::from_utf8_lossy(&o.stdout).into_owned(),
        String::from_utf8_lossy(&o.stderr).into_owned(),
    )
}

fn manifest(dir: &Path) -> Vec<(String, String)> {
    fs::read_to_string(dir.join("out/manifest.txt"))
        .unwrap()
        .lines()
        .map(|l| {
            let (k, v) = l.split_once('=').unwrap();
            (k.to_string(), v.to_string())
        })
        .collect()
}

fn lookup<'a>(m: &'a [(String, String)], key: &str) -> &'a str {
    &m.iter().find(|(k, _)| k == key).unwrap_or_else(|| panic!("no {key} in manifest")).1
}

const ZKB: &str = "
[problem]
q = 1.5
N = 1
norm = euclidean
datum = zkb:c=0.0833333333333333,t0=1
[grid]
R = 3
h = 0.125
[time]
dt0 = 0.01
t_end = 1.5
";

#[test]
fn verify_norm_pnorm_passes() {
    let d = workdir("verify_norm");
    let cfg = write_cfg(&d, &ZKB.replace("euclidean", "pnorm:1.5").replace("N = 1", "N = 2"));
    let (code, out, err) = fdl("verify-norm", &cfg);
    assert_eq!(code, 0, "{out}{err}");
    assert_eq!(out.lines().filter(|l| l.starts_with("CHECK ") && l.contains(" PASS ")).count(), 5);
    assert!(d.join("out/norm_identities.csv").exists());
}

#[test]
fn impossible_tolerance_is_a_check_failure() {
    let d = workdir("verify_norm_fail");
    let body = ZKB.replace("euclidean", "pnorm:4").replace("N = 1", "N = 2") + "[checks]\nidentity_tol = 0\n";
    let (code, _, err) = fdl("verify-norm", &write_cfg(&d, &body));
    assert_eq!(code, 1);
    assert!(err.contains("FAILED "));
    assert_ne!(lookup(&manifest(&d), "failed_checks"), "");
}

#[test]
fn zkb_prints_profile_csv() {
    let d = workdir("zkb");
    let (code, out, err) = fdl("zkb", &write_cfg(&d, ZKB));
    assert_eq!(code, 0, "{err}");
    let csv = fs::read_to_string(d.join("out/zkb_profile.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("r,t,u"));
    let first: Vec<f64> = lines.next().unwrap().split(',').map(|x| x.parse().unwrap()).collect();
    assert_eq!(first[0], 0.0);
    assert_eq!(first[1], 1.0);
    assert!((first[2] - 1.0 / 144.0).abs() < 1e-12);
    assert!(out.contains("r,t,u"));
}

#[test]
fn config_errors_exit_two() {
    let d = workdir("bad_config");
    let (code, _, err) = fdl("solve", &write_cfg(&d, &ZKB.replace("q = 1.5", "q = 0.5")));
    assert_eq!(code, 2);
    assert!(err.contains("q"));
    let (code, _, _) = fdl("solve", &write_cfg(&d, &(ZKB.to_string() + "[grid2]\n")));
    assert_eq!(code, 2);
    let (code, _, _) = fdl("solve", &d.join("missing.cfg"));
    assert_eq!(code, 2);
}

#[test]
fn solver_errors_exit_three() {
    let d = workdir("solver_error");
    let body = ZKB.replace("dt0 = 0.01", "dt0 = 0.01\ndt_growth = 1").to_string() + "[solver]\nmax_newton = 1\nmax_halvings = 0\ndt_min = 0.005\n";
    let (code, _, err) = fdl("solve", &write_cfg(&d, &body));
    assert_eq!(code, 3, "{err}");
}

#[test]
fn blow_up_is_a_finding() {
    let d = workdir("blowup");
    let body = "
[problem]
q = 1.5
N = 1
norm = euclidean
datum = critical:amplitude=4
[grid]
R = 8
h = 0.125
window_radius = 1
[time]
dt0 = 1e-4
t_end = 0.2
[solver]
blowup_growth = 10
[checks]
reports = max_principle
";
    let (code, out, err) = fdl("solve", &write_cfg(&d, body));
    assert_eq!(code, 0, "{out}{err}");
    let m = manifest(&d);
    assert_eq!(lookup(&m, "status"), "BlowUpSuspected");
    let t: f64 = lookup(&m, "t_star").parse().unwrap();
    assert!(t > 0.0 && t < 0.2);
}

#[test]
fn manifest_lists_every_output_and_embeds_the_config() {
    let d = workdir("manifest");
    let body = ZKB.to_string() + "[checks]\nreports = max_principle\n";
    let (code, out, err) = fdl("estimates", &write_cfg(&d, &body));
    assert_eq!(code, 0, "{out}{err}");
    let m = manifest(&d);
    let listed: Vec<&str> = lookup(&m, "outputs").split(',').collect();
    let mut on_disk: Vec<String> =
        fs::read_dir(d.join("out")).unwrap().map(|e| e.unwrap().file_name().into_string().unwrap()).collect();
    on_disk.sort();
    let mut sorted: Vec<String> = listed.iter().map(|s| s.to_string()).collect();
    sorted.sort();
    assert_eq!(sorted, on_disk);
    assert_eq!(lookup(&m, "config.problem.q"), "1.5");
    assert_eq!(lookup(&m, "config.time.t_end"), "1.5");
    assert_eq!(lookup(&m, "monitors"), "monitors.csv");
    let header = fs::read_to_string(d.join("out/monitors.csv")).unwrap();
    assert!(header.starts_with("t,mass,sup,grad_l1,energy\n"));
}

#[test]
fn reruns_are_bit_identical_and_reproducible_from_the_resolved_config() {
    let d = workdir("determinism");
    let body = ZKB.to_string() + "[checks]\nreports = max_principle,pme\ntimes = 1.1,1.3,1.5\n";
    let cfg = write_cfg(&d, &body);
    assert_eq!(fdl("estimates", &cfg).0, 0);
    let first = d.join("first");
    fs::rename(d.join("out"), &first).unwrap();
    assert_eq!(fdl("estimates", &cfg).0, 0);
    for f in ["monitors.csv", "final_u.csv", "estimates.csv", "manifest.txt"] {
        assert_eq!(fs::read(first.join(f)).unwrap(), fs::read(d.join("out").join(f)).unwrap(), "{f}");
    }
    fs::rename(d.join("out"), d.join("second")).unwrap();
    assert_eq!(fdl("estimates", &first.join("resolved.cfg")).0, 0);
    for f in ["monitors.csv", "final_u.csv", "estimates.csv"] {
        assert_eq!(fs::read(first.join(f)).unwrap(), fs::read(d.join("out").join(f)).unwrap(), "{f}");
    }
}

#[test]
fn exhaust_writes_convergence_table() {
    let d = workdir("exhaust");
    let body = "
[problem]
q = 3
N = 1
norm = euclidean
datum = dirac:mass=1,width=0.25
[grid]
radii = 2,4,8
h = 0.125
delta = 0.25
[time]
dt0 = 1e-3
t_end = 0.2
dt_growth = 1.05
dt_max = 0.01
[checks]
radius = 0.5
t1 = 0.05
t2 = 0.2
";
    let (code, out, err) = fdl("exhaust", &write_cfg(&d, body));
    assert_eq!(code, 0, "{out}{err}");
    let csv = fs::read_to_string(d.join("out/exhaust.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "n,R_n,e_n,A1_value");
    assert_eq!(lines.len(), 5);
    assert!(lines[4].starts_with("# PASS"));
}
