use std::f64::consts::PI;
use std::ptr;

use cesaro_lab_ffi::*;

fn last_error() -> String {
    let needed = unsafe { cesaro_last_error_message(ptr::null_mut(), 0) };
    let mut buf = vec![0 as std::ffi::c_char; needed];
    unsafe { cesaro_last_error_message(buf.as_mut_ptr(), buf.len()) };
    let bytes: Vec<u8> = buf.iter().take_while(|&&c| c != 0).map(|&c| c as u8).collect();
    String::from_utf8(bytes).unwrap()
}

fn spike() -> *mut CesaroPc {
    let mut re = vec![0.0; 64];
    re[10] = 32.0;
    let mut out = ptr::null_mut();
    assert_eq!(unsafe { cesaro_pc_new(6, re.as_ptr(), ptr::null(), re.len(), &mut out) }, CesaroStatus::Ok);
    out
}

#[test]
fn function_round_trip() {
    let f = spike();
    let mut level = 0;
    let mut l1 = 0.0;
    unsafe {
        assert_eq!(cesaro_pc_level(f, &mut level), CesaroStatus::Ok);
        assert_eq!(cesaro_pc_norm(f, CesaroNorm::L1, &mut l1), CesaroStatus::Ok);
    }
    assert_eq!(level, 6);
    assert!((l1 - 32.0 * 2.0 * PI / 64.0).abs() < 1e-12);
    let mut c0 = CesaroComplex::default();
    unsafe { assert_eq!(cesaro_pc_coefficient(f, 0, &mut c0), CesaroStatus::Ok) };
    assert!((c0.re - l1 / (2.0 * PI)).abs() < 1e-12 && c0.im.abs() < 1e-12);
    let mut s = CesaroComplex::default();
    let mut v = CesaroComplex::default();
    unsafe {
        assert_eq!(cesaro_pc_eval(f, CesaroOperator::PartialSum, 0, 0.3, &mut s), CesaroStatus::Ok);
        assert_eq!(cesaro_pc_eval(f, CesaroOperator::ValleePoussinMean, 1, 0.3, &mut v), CesaroStatus::Ok);
    }
    assert!((s.re - c0.re).abs() < 1e-12);
    assert!(v.re.is_finite());
    unsafe { cesaro_pc_free(f) };
}

#[test]
fn bad_inputs_report_codes_and_messages() {
    let re = [1.0; 3];
    let mut out = ptr::null_mut();
    let st = unsafe { cesaro_pc_new(2, re.as_ptr(), ptr::null(), re.len(), &mut out) };
    assert_eq!(st, CesaroStatus::InvalidArgument);
    assert!(out.is_null());
    assert!(!last_error().is_empty());

    let mut level = 0;
    assert_eq!(unsafe { cesaro_pc_level(ptr::null(), &mut level) }, CesaroStatus::NullPointer);
    assert!(last_error().contains("null"));

    let f = spike();
    let mut cz = ptr::null_mut();
    // Below the mean of |f| the decomposition hypothesis fails.
    assert_eq!(unsafe { cesaro_cz_new(f, 0.01, &mut cz) }, CesaroStatus::Hypothesis);
    let mut h = CesaroComplex::default();
    assert_eq!(
        unsafe { cesaro_pc_eval(f, CesaroOperator::ValleePoussinMean, 0, 0.0, &mut h) },
        CesaroStatus::InvalidArgument
    );
    unsafe { cesaro_pc_free(f) };
    unsafe { cesaro_pc_free(ptr::null_mut()) };
}

#[test]
fn decomposition_handle() {
    let f = spike();
    let mut cz = ptr::null_mut();
    assert_eq!(unsafe { cesaro_cz_new(f, 2.0, &mut cz) }, CesaroStatus::Ok);
    let (mut count, mut measure) = (0usize, 0.0);
    unsafe {
        cesaro_cz_interval_count(cz, &mut count);
        cesaro_cz_measure(cz, &mut measure);
    }
    assert!(count >= 1);
    assert!(measure <= 32.0 * 2.0 * PI / 64.0 / 2.0 + 1e-12);
    let (mut level, mut index) = (0u32, 0u64);
    assert_eq!(unsafe { cesaro_cz_interval(cz, 0, &mut level, &mut index) }, CesaroStatus::Ok);
    assert!(index < 1 << level);
    assert_eq!(unsafe { cesaro_cz_interval(cz, count, &mut level, &mut index) }, CesaroStatus::InvalidArgument);
    let mut good = ptr::null_mut();
    assert_eq!(unsafe { cesaro_cz_good_part(cz, &mut good) }, CesaroStatus::Ok);
    let mut sup = 0.0;
    unsafe { cesaro_pc_norm(good, CesaroNorm::Sup, &mut sup) };
    assert!(sup <= 4.0 + 1e-12);
    unsafe {
        cesaro_pc_free(good);
        cesaro_cz_free(cz);
        cesaro_pc_free(f);
    }
}

#[test]
fn sequence_handles() {
    let mut s = ptr::null_mut();
    assert_eq!(unsafe { cesaro_seq_lacunary(3.0, 10, 5, &mut s) }, CesaroStatus::Ok);
    let mut len = 0;
    let mut terms = Vec::new();
    unsafe {
        cesaro_seq_len(s, &mut len);
        for j in 1..=len {
            let mut t = 0;
            assert_eq!(cesaro_seq_term(s, j, &mut t), CesaroStatus::Ok);
            terms.push(t);
        }
        let mut t = 0;
        assert_eq!(cesaro_seq_term(s, 0, &mut t), CesaroStatus::InvalidArgument);
        cesaro_seq_free(s);
    }
    assert_eq!(terms, vec![10, 30, 90, 270, 810]);
    let mut d = ptr::null_mut();
    assert_eq!(unsafe { cesaro_seq_delta_growth(0.5, 10, 5, &mut d) }, CesaroStatus::Hypothesis);
}

#[test]
fn kernels() {
    assert!((cesaro_fejer_kernel(0, 1.0) - 0.5).abs() < 1e-15);
    assert!((cesaro_dirichlet_kernel(3, 0.0) - 3.5).abs() < 1e-12);
}

#[test]
fn header_declares_entry_points() {
    let h = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/cesaro_lab.h")).unwrap();
    for name in ["cesaro_pc_new", "cesaro_cz_new", "cesaro_seq_term", "cesaro_last_error_message", "CESARO_STATUS_OK"] {
        assert!(h.contains(name), "{name}");
    }
}
