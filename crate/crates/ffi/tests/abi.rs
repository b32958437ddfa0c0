use std::ffi::{CStr, CString};
use std::ptr;

use pileup_ffi::*;

fn last_error() -> String {
    let p = pileup_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn power_law(a: f64) -> *mut PileupPotential {
    let mut p = ptr::null_mut();
    assert_eq!(unsafe { pileup_potential_power_law(a, &mut p) }, PileupStatus::Ok);
    p
}

#[test]
fn finite_solve_round_trip() {
    let p = power_law(2.0);
    let mut c = ptr::null_mut();
    unsafe {
        assert_eq!(pileup_solve_finite(p, 16, 0.0, &mut c), PileupStatus::Ok);
        assert_eq!(pileup_configuration_n(c), 16);
        let mut x = vec![0.0; 17];
        assert_eq!(pileup_configuration_positions(c, x.as_mut_ptr(), x.len()), PileupStatus::Ok);
        assert_eq!(x[0], 0.0);
        assert_eq!(x[16], 1.0);
        assert!(x.windows(2).all(|w| w[1] > w[0]));
        let mut e = vec![0.0; 16];
        assert_eq!(pileup_configuration_strains(c, e.as_mut_ptr(), e.len()), PileupStatus::Ok);
        assert!(e.iter().sum::<f64>().abs() < 1e-12);
        assert!((e[0] - e[15]).abs() < 1e-12);
        assert!(e[0] < 0.0);

        let mut short = [0.0; 3];
        assert_eq!(pileup_configuration_strains(c, short.as_mut_ptr(), 3), PileupStatus::BufferTooSmall);
        assert!(last_error().contains("need 16"));

        let mut energy = 0.0;
        assert_eq!(pileup_renorm_energy(p, e.as_ptr(), e.len(), &mut energy), PileupStatus::Ok);
        assert!(energy < 0.0);

        pileup_configuration_free(c);
        pileup_potential_free(p);
    }
}

#[test]
fn boundary_layer_and_stress() {
    let mut p = ptr::null_mut();
    let spec = CString::new("wall").unwrap();
    unsafe {
        assert_eq!(pileup_potential_parse(spec.as_ptr(), &mut p), PileupStatus::Ok);
        let mut s = ptr::null_mut();
        assert_eq!(pileup_solve_bl(p, 50, 60, 0.0, &mut s), PileupStatus::Ok);
        assert_eq!(pileup_bl_free_len(s), 50);
        let mut e = vec![0.0; 50];
        assert_eq!(pileup_bl_strains(s, e.as_mut_ptr(), 50), PileupStatus::Ok);
        assert!(e[0] < 0.0 && e[49].abs() < 1e-3 * e[0].abs());
        pileup_bl_free(s);

        let mut sig = [0.0; 4];
        assert_eq!(pileup_boundary_stress(p, 0, 4, sig.as_mut_ptr()), PileupStatus::Ok);
        assert!(sig.windows(2).all(|w| w[1] < w[0] && w[1] > 0.0));
        let mut fin = [0.0; 4];
        assert_eq!(pileup_boundary_stress(p, 400, 4, fin.as_mut_ptr()), PileupStatus::Ok);
        for (a, b) in sig.iter().zip(&fin) {
            assert!((a - b).abs() < 1e-12);
        }
        pileup_potential_free(p);
    }
}

#[test]
fn errors_map_to_codes() {
    let mut p = ptr::null_mut();
    unsafe {
        assert_eq!(pileup_potential_power_law(0.5, &mut p), PileupStatus::InvalidArgument);
        assert!(p.is_null());
        assert!(last_error().contains("a"));

        let bad = CString::new("lennard-jones").unwrap();
        assert_eq!(pileup_potential_parse(bad.as_ptr(), &mut p), PileupStatus::InvalidArgument);
        assert_eq!(pileup_potential_parse(ptr::null(), &mut p), PileupStatus::NullPointer);

        let q = power_law(3.0);
        let mut v = 0.0;
        assert_eq!(pileup_potential_eval(q, 0, -1.0, &mut v), PileupStatus::Domain);
        assert_eq!(pileup_potential_eval(q, 0, 2.0, &mut v), PileupStatus::Ok);
        assert!((v - 0.125).abs() < 1e-15);
        assert_eq!(pileup_potential_eval(q, 0, 2.0, ptr::null_mut()), PileupStatus::NullPointer);
        assert_eq!(pileup_potential_eval(ptr::null(), 0, 2.0, &mut v), PileupStatus::NullPointer);

        let odd = [0.1, 0.2];
        assert_eq!(pileup_renorm_energy(q, odd.as_ptr(), 2, &mut v), PileupStatus::Domain);
        pileup_potential_free(q);
        pileup_potential_free(ptr::null_mut());
    }
}

#[test]
fn closed_forms() {
    let mut z = 0.0;
    unsafe {
        assert_eq!(pileup_zeta(2.0, &mut z), PileupStatus::Ok);
        assert!((z - std::f64::consts::PI.powi(2) / 6.0).abs() < 1e-12);
        assert_eq!(pileup_zeta(1.0, &mut z), PileupStatus::Divergence);
        let p = power_law(3.0);
        assert_eq!(pileup_second_moment(p, &mut z), PileupStatus::Ok);
        assert!(z.is_finite() && z > 0.0);
        pileup_potential_free(p);
    }
    let v = unsafe { CStr::from_ptr(pileup_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn header_declares_every_export() {
    let h = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/pileup.h")).unwrap();
    let src = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/src/lib.rs")).unwrap();
    let names: Vec<&str> = src.split("extern \"C\" fn ").skip(1).map(|s| s.split('(').next().unwrap()).collect();
    assert!(names.len() > 15);
    for n in names {
        assert!(h.contains(&format!("{n}(")), "{n} missing from header");
    }
    assert!(h.contains("typedef struct PileupPotential PileupPotential"));
    assert!(h.contains("PILEUP_STATUS_NON_CONVERGENCE"));
}
