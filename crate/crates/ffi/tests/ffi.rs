use std::ffi::{c_char, c_int, CString};
use std::path::PathBuf;
use std::process::Command;

use blowuplab_ffi::*;

const ODE_CONFIG: &str = r#"
[params]
p = 2.0
domain_radius = 1.0
nx = 101
cfl = 0.5
t_end = 1.0
alpha = 3.0
boundary = "periodic"
snapshot_stride = 1000

[initial_data.u0]
kind = "constant"
value = 0.0

[initial_data.u1]
kind = "constant"
value = 2.0
"#;

fn last_error() -> String {
    let mut buf = vec![0 as c_char; 512];
    let n = unsafe { blowup_last_error_message(buf.as_mut_ptr(), buf.len()) };
    let bytes: Vec<u8> = buf[..n.min(511)].iter().map(|&c| c as u8).collect();
    String::from_utf8(bytes).unwrap()
}

fn new_sim(text: &str) -> (BlowupStatus, *mut BlowupSimulation) {
    let c = CString::new(text).unwrap();
    let mut sim = std::ptr::null_mut();
    let st = unsafe { blowup_simulation_new(c.as_ptr(), &mut sim) };
    (st, sim)
}

#[test]
fn constants_and_exact_profile() {
    let (mut beta, mut kappa) = (0.0, 0.0);
    unsafe {
        assert_eq!(blowup_constants(1.5, &mut beta, &mut kappa), BlowupStatus::Ok);
        assert_eq!((beta, kappa), (2.0, 4.0));
        assert_eq!(
            blowup_constants(1.0, &mut beta, &mut kappa),
            BlowupStatus::InvalidArgument
        );
        assert!(last_error().contains("p = 1"), "{}", last_error());
        assert_eq!(
            blowup_constants(2.0, std::ptr::null_mut(), &mut kappa),
            BlowupStatus::NullPointer
        );
        let mut kt = 0.0;
        assert_eq!(blowup_ode_exact_kt(0.25, 0.5, 2.0, &mut kt), BlowupStatus::Ok);
        assert!((kt - 4.0).abs() < 1e-12);
    }
}

#[test]
fn criterion_on_constant_data_flips_at_three_halves() {
    let n = 401;
    let zeros = vec![0.0; n];
    let eval = |c: f64| {
        let w0 = vec![c; n];
        let (mut v, mut sat) = (0.0, -1 as c_int);
        let st = unsafe {
            blowup_initial_criterion(
                2.0,
                3.0,
                1,
                n,
                w0.as_ptr(),
                zeros.as_ptr(),
                zeros.as_ptr(),
                &mut v,
                &mut sat,
            )
        };
        assert_eq!(st, BlowupStatus::Ok);
        (v, sat)
    };
    assert_eq!(eval(1.49).1, 1);
    assert_eq!(eval(1.51).1, 0);
    assert!(eval(1.5).0.abs() < 1e-8);
}

#[test]
fn simulation_handle_round_trip() {
    let (st, sim) = new_sim(ODE_CONFIG);
    assert_eq!(st, BlowupStatus::Ok, "{}", last_error());
    unsafe {
        let mut halt = BlowupHalt::ReachedTEnd;
        assert_eq!(blowup_simulation_halt_reason(sim, &mut halt), BlowupStatus::Ok);
        assert_eq!(halt, BlowupHalt::BlowupDetected);

        let (mut rows, mut nx) = (0usize, 0usize);
        assert_eq!(blowup_simulation_sizes(sim, &mut rows, &mut nx), BlowupStatus::Ok);
        assert_eq!(nx, 101);
        let mut t = vec![0.0; rows];
        let mut ut = vec![0.0; rows];
        assert_eq!(
            blowup_simulation_series(sim, BlowupSeriesColumn::Time as c_int, t.as_mut_ptr(), rows),
            BlowupStatus::Ok
        );
        assert_eq!(
            blowup_simulation_series(sim, BlowupSeriesColumn::MaxUt as c_int, ut.as_mut_ptr(), rows),
            BlowupStatus::Ok
        );
        assert_eq!(t[0], 0.0);
        assert_eq!(ut[0], 2.0);
        assert!(t.windows(2).all(|w| w[1] > w[0]));
        assert_eq!(
            blowup_simulation_series(sim, 7, t.as_mut_ptr(), rows),
            BlowupStatus::InvalidArgument
        );
        assert_eq!(
            blowup_simulation_series(sim, 0, t.as_mut_ptr(), rows - 1),
            BlowupStatus::BufferTooSmall
        );

        let mut est = BlowupEstimate::default();
        assert_eq!(blowup_simulation_estimate(sim, &mut est), BlowupStatus::Ok);
        assert!((est.t_hat - 0.5).abs() < 1e-4, "{est:?}");
        assert!((est.beta_hat - 1.0).abs() < 1e-3);

        let mut lb = BlowupLowerBound::default();
        assert_eq!(blowup_simulation_lower_bound(sim, 0.1, &mut lb), BlowupStatus::Ok);
        assert_eq!((lb.ut_verdict, lb.f_verdict), (0, 0), "{lb:?}");

        let mut x = vec![0.0; nx];
        let mut u = vec![0.0; nx];
        let mut v = vec![0.0; nx];
        assert_eq!(
            blowup_simulation_final_state(sim, x.as_mut_ptr(), u.as_mut_ptr(), v.as_mut_ptr(), nx),
            BlowupStatus::Ok
        );
        assert_eq!(x[0], -1.0);
        assert!(v.iter().all(|&s| s > 1e7));
        blowup_simulation_free(sim);
        blowup_simulation_free(std::ptr::null_mut());
    }
}

#[test]
fn bad_configs_are_reported() {
    let (st, sim) = new_sim("not toml [");
    assert_eq!(st, BlowupStatus::InvalidConfig);
    assert!(sim.is_null());
    assert!(!last_error().is_empty());

    let (st, _) = new_sim(&ODE_CONFIG.replace("p = 2.0", "p = 0.5"));
    assert_eq!(st, BlowupStatus::InvalidConfig);
    assert!(last_error().contains("p = 0.5"), "{}", last_error());

    let mut sim = std::ptr::null_mut();
    let st = unsafe { blowup_simulation_new(std::ptr::null(), &mut sim) };
    assert_eq!(st, BlowupStatus::NullPointer);
}

#[test]
fn estimate_absent_without_blowup() {
    let (st, sim) = new_sim(&ODE_CONFIG.replace("value = 2.0", "value = 0.0"));
    assert_eq!(st, BlowupStatus::Ok);
    unsafe {
        let mut est = BlowupEstimate::default();
        assert_eq!(blowup_simulation_estimate(sim, &mut est), BlowupStatus::InsufficientData);
        assert!(last_error().contains("ReachedTEnd"), "{}", last_error());
        blowup_simulation_free(sim);
    }
}

#[test]
fn error_message_truncates_safely() {
    unsafe {
        let mut b = 0.0;
        blowup_constants(0.0, &mut b, &mut b);
        let mut small = [1 as c_char; 4];
        let full = blowup_last_error_message(small.as_mut_ptr(), small.len());
        assert!(full > 3);
        assert_eq!(small[3], 0);
        assert_eq!(blowup_last_error_message(std::ptr::null_mut(), 0), full);
    }
}

#[test]
fn header_declares_the_exported_symbols() {
    let header = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("include/blowuplab.h");
    let text = std::fs::read_to_string(header).unwrap();
    for sym in [
        "blowup_last_error_message",
        "blowup_version",
        "blowup_constants",
        "blowup_ode_exact_kt",
        "blowup_initial_criterion",
        "blowup_simulation_new",
        "blowup_simulation_free",
        "blowup_simulation_halt_reason",
        "blowup_simulation_sizes",
        "blowup_simulation_series",
        "blowup_simulation_final_state",
        "blowup_simulation_estimate",
        "blowup_simulation_lower_bound",
        "typedef struct BlowupSimulation BlowupSimulation",
        "BLOWUP_STATUS_OK = 0",
    ] {
        assert!(text.contains(sym), "header lacks {sym}");
    }
}

/// Compile the C example against the header and the static library.
/// `cargo test` does not produce the archive, so it is built into a
/// separate target directory when it is missing. Skipped without a C compiler.
#[test]
fn c_smoke_program_links_and_runs() {
    let manifest = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    if Command::new("cc").arg("--version").output().is_err() {
        eprintln!("skipping: no C compiler");
        return;
    }
    // tests run from target/<profile>/deps
    let exe = std::env::current_exe().unwrap();
    let profile_dir = exe.parent().and_then(|d| d.parent()).unwrap().to_path_buf();
    let mut archive = profile_dir.join("libblowuplab_ffi.a");
    if !archive.exists() {
        let target = profile_dir.parent().unwrap().join("ffi-smoke");
        let status = Command::new(env!("CARGO"))
            .args(["build", "--release", "-p", "blowuplab-ffi", "--target-dir"])
            .arg(&target)
            .status()
            .unwrap();
        assert!(status.success(), "building the static library failed");
        archive = target.join("release/libblowuplab_ffi.a");
    }
    let dir = tempfile::tempdir().unwrap();
    let bin = dir.path().join("smoke");
    let status = Command::new("cc")
        .arg(manifest.join("examples/smoke.c"))
        .arg("-I")
        .arg(manifest.join("include"))
        .arg(&archive)
        .args(["-lm", "-lpthread", "-ldl", "-o"])
        .arg(&bin)
        .status()
        .unwrap();
    assert!(status.success(), "C compilation failed");
    let out = Command::new(&bin).output().unwrap();
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(out.status.success(), "{stdout} {}", String::from_utf8_lossy(&out.stderr));
    assert!(stdout.starts_with("halt=1 T=0.5000"), "{stdout}");
}
