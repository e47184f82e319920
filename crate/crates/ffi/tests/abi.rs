use std::ptr;

use l2dens_ffi::*;

fn last_error() -> String {
    let mut buf = vec![0 as std::ffi::c_char; 256];
    let n = unsafe { l2dens_last_error(buf.as_mut_ptr(), buf.len()) };
    let bytes: Vec<u8> = buf.iter().take(n.min(255)).map(|c| *c as u8).collect();
    String::from_utf8(bytes).unwrap()
}

fn gaussian_rows(n: usize) -> Vec<f64> {
    // Deterministic quasi-normal sample via the inverse of a logistic CDF.
    (0..n)
        .map(|i| {
            let u = (i as f64 * 0.618_033_988_749_895).fract() * 0.998 + 0.001;
            (u / (1.0 - u)).ln() / 1.7
        })
        .collect()
}

#[test]
fn estimate_round_trip() {
    let mut k = ptr::null_mut();
    assert_eq!(unsafe { l2dens_kernel_new(2, 1, &mut k) }, L2densStatus::Ok);
    let (mut l1, mut sup, mut varpi) = (0.0, 0.0, 0.0);
    assert_eq!(unsafe { l2dens_kernel_norms(k, &mut l1, &mut sup, &mut varpi) }, L2densStatus::Ok);
    assert!(varpi >= 1.0 && varpi >= l1 && varpi >= sup);

    let data = gaussian_rows(400);
    let mut est = ptr::null_mut();
    let s = unsafe { l2dens_estimate(k, data.as_ptr(), data.len(), 1, 2.0, true, &mut est) };
    assert_eq!(s, L2densStatus::Ok, "{}", last_error());
    let v = unsafe { l2dens_estimate_value(est) };
    assert!(v.is_finite() && v > 0.0);
    assert_ne!(unsafe { l2dens_estimate_branch(est) }, L2densBranch::None);
    let sel = unsafe { l2dens_estimate_selected(est) };
    assert!((sel * sel - unsafe { l2dens_estimate_n_hat(est) }.abs()).abs() < 1e-12);

    let mut h = [0.0f64; 1];
    let mut e = [0u32; 1];
    assert_eq!(unsafe { l2dens_estimate_bandwidth(est, h.as_mut_ptr(), e.as_mut_ptr(), 1) }, L2densStatus::Ok);
    assert!((h[0] - (-(e[0] as f64)).exp()).abs() < 1e-15);
    assert_eq!(
        unsafe { l2dens_estimate_bandwidth(est, h.as_mut_ptr(), e.as_mut_ptr(), 0) },
        L2densStatus::BufferTooSmall
    );
    unsafe {
        l2dens_estimate_free(est);
        l2dens_kernel_free(k);
    }
}

#[test]
fn errors_are_reported() {
    let mut k = ptr::null_mut();
    assert_eq!(unsafe { l2dens_kernel_new(1, 1, &mut k) }, L2densStatus::InvalidArgument);
    assert!(last_error().contains("b=1"));
    assert_eq!(unsafe { l2dens_kernel_new(2, 1, ptr::null_mut()) }, L2densStatus::NullPointer);

    assert_eq!(unsafe { l2dens_kernel_new(2, 1, &mut k) }, L2densStatus::Ok);
    let data = gaussian_rows(101);
    let mut est = ptr::null_mut();
    let s = unsafe { l2dens_estimate(k, data.as_ptr(), 101, 1, 2.0, false, &mut est) };
    assert_eq!(s, L2densStatus::OddSampleSize);
    assert!(last_error().contains("n = 2m"));
    let s = unsafe { l2dens_estimate(k, data.as_ptr(), 20, 1, 2.0, false, &mut est) };
    assert_eq!(s, L2densStatus::UnsupportedSampleSize);
    let s = unsafe { l2dens_estimate(k, data.as_ptr(), 50, 2, 2.0, false, &mut est) };
    assert_eq!(s, L2densStatus::InvalidArgument);
    assert!(est.is_null());
    assert!(unsafe { l2dens_estimate_value(ptr::null()) }.is_nan());
    unsafe {
        l2dens_kernel_free(k);
        l2dens_kernel_free(ptr::null_mut());
        l2dens_estimate_free(ptr::null_mut());
    }
}

#[test]
fn rate_exponent_isotropic() {
    let beta = [2.0, 2.0];
    let r = [f64::INFINITY, f64::INFINITY];
    let mut z = 0.0;
    assert_eq!(unsafe { l2dens_rate_exponent(beta.as_ptr(), r.as_ptr(), 2, &mut z) }, L2densStatus::Ok);
    assert_eq!(z, 0.5);
    let bad = [0.5];
    assert_eq!(
        unsafe { l2dens_rate_exponent(beta.as_ptr(), bad.as_ptr(), 1, &mut z) },
        L2densStatus::InvalidArgument
    );
}

#[test]
fn header_declares_the_interface() {
    let header = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/l2dens.h")).unwrap();
    for name in [
        "L2DENS_H",
        "L2DENS_STATUS_OK",
        "L2DENS_STATUS_ODD_SAMPLE_SIZE",
        "L2DENS_BRANCH_PARAMETRIC",
        "typedef struct L2densKernel L2densKernel;",
        "l2dens_kernel_new",
        "l2dens_estimate(",
        "l2dens_estimate_free",
        "l2dens_last_error",
        "l2dens_rate_exponent",
    ] {
        assert!(header.contains(name), "missing {name}");
    }
    let version = unsafe { std::ffi::CStr::from_ptr(l2dens_version()) };
    assert_eq!(version.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn c_program_links_against_the_static_library() {
    let root = std::path::Path::new(env!("CARGO_MANIFEST_DIR"));
    let exe = std::env::current_exe().unwrap();
    // target/<profile>/deps/<test-binary>
    let profile_dir = exe.parent().and_then(|p| p.parent()).unwrap();
    let lib = profile_dir.join("libl2dens_ffi.a");
    let cargo = std::env::var("CARGO").unwrap_or_else(|_| "cargo".into());
    let built = std::process::Command::new(cargo)
        .args(["build", "-q", "-p", "l2dens-ffi", "--lib"])
        .current_dir(root)
        .status();
    if !built.is_ok_and(|s| s.success()) || !lib.exists() || std::process::Command::new("cc").arg("--version").output().is_err() {
        eprintln!("skipping: no C compiler or static library");
        return;
    }
    let out = std::env::temp_dir().join(format!("l2dens_smoke_{}", std::process::id()));
    let status = std::process::Command::new("cc")
        .arg(root.join("examples/smoke.c"))
        .arg("-I")
        .arg(root.join("include"))
        .arg(&lib)
        .args(["-lm", "-lpthread", "-ldl", "-o"])
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    let run = std::process::Command::new(&out).output().unwrap();
    let _ = std::fs::remove_file(&out);
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    let v: f64 = String::from_utf8(run.stdout).unwrap().trim().parse().unwrap();
    assert!(v > 0.0 && v.is_finite());
}
