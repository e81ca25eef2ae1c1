use std::ffi::{CStr, CString};
use std::ptr;

use vlasov_renorm_ffi::*;

fn last_error() -> String {
    unsafe { CStr::from_ptr(vr_last_error()) }.to_string_lossy().into_owned()
}

fn x_axis(len: usize) -> VrAxis {
    VrAxis { kind: 1, origin: 0.0, extent: 1.0, len }
}

fn sine(n: usize) -> *mut VrField {
    let data: Vec<f64> = (0..n).map(|i| (std::f64::consts::TAU * i as f64 / n as f64).sin()).collect();
    let mut f = ptr::null_mut();
    let s = unsafe { vr_field_new(&x_axis(n), 1, data.as_ptr(), n, &mut f) };
    assert_eq!(s, VrStatus::Ok, "{}", last_error());
    f
}

#[test]
fn field_roundtrip_and_norms() {
    let f = sine(64);
    unsafe {
        let mut len = 0;
        assert_eq!(vr_field_len(f, &mut len), VrStatus::Ok);
        assert_eq!(len, 64);

        let mut small = [0.0; 8];
        assert_eq!(vr_field_copy(f, small.as_mut_ptr(), small.len()), VrStatus::BufferTooSmall);
        assert!(last_error().contains("64"));
        let mut buf = vec![0.0; len];
        assert_eq!(vr_field_copy(f, buf.as_mut_ptr(), len), VrStatus::Ok);
        assert!((buf[16] - 1.0).abs() < 1e-15);

        let (mut l2, mut sup) = (0.0, 0.0);
        assert_eq!(vr_lp_norm(f, 2.0, &mut l2), VrStatus::Ok);
        assert_eq!(vr_lp_norm(f, f64::INFINITY, &mut sup), VrStatus::Ok);
        assert!((l2 - 0.5f64.sqrt()).abs() < 1e-12, "{l2}");
        assert!((sup - 1.0).abs() < 1e-15);
        assert_eq!(vr_lp_norm(f, 0.5, &mut l2), VrStatus::InvalidArgument);

        let (mut lp, mut semi) = (0.0, 0.0);
        assert_eq!(vr_sobolev_norm(f, 0.5, 2.0, &mut lp, &mut semi), VrStatus::Ok);
        assert!(semi > 0.0);
        let mut ann = 0.0;
        let kinds = [1u32];
        assert_eq!(vr_theta_annular(f, 0.05, 0.5, 2.0, kinds.as_ptr(), 1, &mut ann), VrStatus::Ok);
        assert!(ann > 0.0 && ann <= lp + semi);
        vr_field_free(f);
    }
}

#[test]
fn mollify_checks_the_scale() {
    let f = sine(64);
    unsafe {
        let mut g = ptr::null_mut();
        assert_eq!(vr_mollify(f, 1, 0.01, &mut g), VrStatus::Scale);
        assert!(g.is_null());
        assert_eq!(vr_mollify(f, 3, 0.1, &mut g), VrStatus::Shape);
        assert_eq!(vr_mollify(f, 9, 0.1, &mut g), VrStatus::InvalidArgument);
        assert_eq!(vr_mollify(f, 1, 0.1, &mut g), VrStatus::Ok);
        let (mut a, mut b) = (0.0, 0.0);
        vr_lp_norm(f, 2.0, &mut a);
        vr_lp_norm(g, 2.0, &mut b);
        assert!(b < a);
        vr_field_free(g);
        vr_field_free(f);
    }
}

#[test]
fn synthesis_is_deterministic() {
    let axis = x_axis(256);
    unsafe {
        let (mut a, mut b) = (ptr::null_mut(), ptr::null_mut());
        assert_eq!(vr_field_synth(&axis, 1, 0.5, 2.0, 7, &mut a), VrStatus::Ok);
        assert_eq!(vr_field_synth(&axis, 1, 0.5, 2.0, 7, &mut b), VrStatus::Ok);
        let (mut x, mut y) = (vec![0.0; 256], vec![0.0; 256]);
        vr_field_copy(a, x.as_mut_ptr(), 256);
        vr_field_copy(b, y.as_mut_ptr(), 256);
        assert_eq!(x, y);
        let mut c = ptr::null_mut();
        assert_eq!(vr_field_synth(&axis, 1, 1.5, 2.0, 7, &mut c), VrStatus::InvalidArgument);
        vr_field_free(a);
        vr_field_free(b);
    }
}

#[test]
fn criticality_and_fit() {
    unsafe {
        let (mut n, mut d) = (0, 0);
        assert_eq!(vr_criticality(1, 5, 1, 3, &mut n, &mut d), VrStatus::Ok);
        assert_eq!((n, d), (0, 1));
        assert_eq!(vr_criticality(1, 2, 1, 2, &mut n, &mut d), VrStatus::Ok);
        assert_eq!((n, d), (5, 4));
        assert_eq!(vr_criticality(1, 0, 1, 2, &mut n, &mut d), VrStatus::InvalidArgument);

        let scales = [0.1, 0.05, 0.025];
        let values: Vec<f64> = scales.iter().map(|e: &f64| 3.0 * e.powf(0.75)).collect();
        let (mut slope, mut icept) = (0.0, 0.0);
        assert_eq!(vr_fit_rate(scales.as_ptr(), values.as_ptr(), 3, &mut slope, &mut icept), VrStatus::Ok);
        assert!((slope - 0.75).abs() < 1e-12);
        assert!((icept - 3f64.ln()).abs() < 1e-12);
        assert_eq!(vr_fit_rate(ptr::null(), values.as_ptr(), 3, &mut slope, &mut icept), VrStatus::NullPointer);
    }
}

#[test]
fn simulation_steps_saves_and_resumes() {
    let dir = tempfile::tempdir().unwrap();
    let file = CString::new(dir.path().join("state.vrnf").to_str().unwrap()).unwrap();
    unsafe {
        let mut sim = ptr::null_mut();
        assert_eq!(vr_sim_new(64, 64, 1, 0.0, 1.0, &mut sim), VrStatus::Cfl);
        assert!(last_error().contains("CFL") || last_error().contains("cfl"), "{}", last_error());
        assert_eq!(vr_sim_new(64, 64, 1, 0.0, 0.05, &mut sim), VrStatus::Ok);

        let (mut t, mut k, mut m0, mut g) = (0.0, 0, 0.0, 0.0);
        vr_sim_status(sim, &mut t, &mut k, &mut m0, &mut g);
        assert_eq!(vr_sim_step(sim, 4), VrStatus::Ok);
        let mut m = 0.0;
        assert_eq!(vr_sim_status(sim, &mut t, &mut k, &mut m, &mut g), VrStatus::Ok);
        assert_eq!(k, 4);
        assert!((t - 0.2).abs() < 1e-12);
        assert!((m - m0).abs() <= 1e-12 * m0);
        assert!(g < 1e-8);

        assert_eq!(vr_sim_save(sim, file.as_ptr()), VrStatus::Ok);
        let mut back = ptr::null_mut();
        assert_eq!(vr_sim_load(file.as_ptr(), t, k, 0.05, &mut back), VrStatus::Ok);
        let (mut u1, mut u2) = (ptr::null_mut(), ptr::null_mut());
        vr_sim_distribution(sim, &mut u1);
        vr_sim_distribution(back, &mut u2);
        let mut n = 0;
        vr_field_len(u1, &mut n);
        let (mut a, mut b) = (vec![0.0; n], vec![0.0; n]);
        vr_field_copy(u1, a.as_mut_ptr(), n);
        vr_field_copy(u2, b.as_mut_ptr(), n);
        assert_eq!(a, b);

        // Identical continuations from the live and the reloaded state.
        vr_sim_step(sim, 2);
        vr_sim_step(back, 2);
        vr_field_free(u1);
        vr_field_free(u2);
        vr_sim_distribution(sim, &mut u1);
        vr_sim_distribution(back, &mut u2);
        vr_field_copy(u1, a.as_mut_ptr(), n);
        vr_field_copy(u2, b.as_mut_ptr(), n);
        assert_eq!(a, b);
        vr_field_free(u1);
        vr_field_free(u2);
        vr_sim_free(sim);
        vr_sim_free(back);
    }
}

#[test]
fn corrupted_file_reports_checksum() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("state.vrnf");
    let file = CString::new(path.to_str().unwrap()).unwrap();
    unsafe {
        let mut sim = ptr::null_mut();
        assert_eq!(vr_sim_new(32, 32, 1, 0.0, 0.05, &mut sim), VrStatus::Ok);
        assert_eq!(vr_sim_save(sim, file.as_ptr()), VrStatus::Ok);
        vr_sim_free(sim);
    }
    let mut bytes = std::fs::read(&path).unwrap();
    let mid = bytes.len() / 2;
    bytes[mid] ^= 1;
    std::fs::write(&path, bytes).unwrap();
    unsafe {
        let mut sim = ptr::null_mut();
        assert_eq!(vr_sim_load(file.as_ptr(), 0.0, 0, 0.05, &mut sim), VrStatus::Checksum);
        assert!(sim.is_null());
        let missing = CString::new(dir.path().join("nope").to_str().unwrap()).unwrap();
        assert_eq!(vr_sim_load(missing.as_ptr(), 0.0, 0, 0.05, &mut sim), VrStatus::Io);
    }
}

#[test]
fn errors_are_per_thread() {
    unsafe {
        let mut v = 0.0;
        assert_eq!(vr_lp_norm(ptr::null(), 2.0, &mut v), VrStatus::NullPointer);
    }
    assert!(last_error().contains("field"));
    let other = std::thread::spawn(last_error).join().unwrap();
    assert_eq!(other, "");
}

#[test]
fn header_declares_every_entry_point() {
    let header = include_str!("../include/vlasov_renorm.h");
    for name in [
        "vr_last_error", "vr_version", "vr_field_new", "vr_field_synth", "vr_field_free", "vr_field_len", "vr_field_copy",
        "vr_mollify", "vr_lp_norm", "vr_sobolev_norm", "vr_theta_annular", "vr_criticality", "vr_fit_rate", "vr_sim_new",
        "vr_sim_free", "vr_sim_step", "vr_sim_status", "vr_sim_distribution", "vr_sim_save", "vr_sim_load",
    ] {
        assert!(header.contains(&format!("{name}(")), "{name}");
    }
    let v = unsafe { CStr::from_ptr(vr_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}
