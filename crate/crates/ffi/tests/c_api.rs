use std::ffi::CString;
use std::ptr;

use meeql::mfm::logistic_solution;
use meeql_ffi::*;

fn last_error() -> String {
    let n = unsafe { meeql_last_error_message(ptr::null_mut(), 0) };
    let mut buf = vec![0u8; n + 1];
    unsafe { meeql_last_error_message(buf.as_mut_ptr().cast(), buf.len()) };
    buf.truncate(n);
    String::from_utf8(buf).unwrap()
}

fn meanfield() -> *mut MeeqlModel {
    let mut m = ptr::null_mut();
    assert_eq!(unsafe { meeql_model_meanfield(&mut m) }, MeeqlStatus::Ok);
    assert!(!m.is_null());
    m
}

#[test]
fn meanfield_coefficients_scale_with_rp() {
    let m = meanfield();
    let mut c = [0.0; 4];
    let mut len = 0;
    let st = unsafe { meeql_model_coefficients(m, 2.0, c.as_mut_ptr(), c.len(), &mut len) };
    assert_eq!(st, MeeqlStatus::Ok);
    assert_eq!(len, 2);
    assert_eq!(&c[..2], &[1.0, -2.0]);

    let st = unsafe { meeql_model_coefficients(m, 2.0, ptr::null_mut(), 0, &mut len) };
    assert_eq!(st, MeeqlStatus::BufferTooSmall);
    assert_eq!(len, 2);

    let mut kind = MeeqlModelKind::Oat;
    assert_eq!(unsafe { meeql_model_kind(m, &mut kind) }, MeeqlStatus::Ok);
    assert_eq!(kind, MeeqlModelKind::Meanfield);
    unsafe { meeql_model_free(m) };
}

#[test]
fn predict_matches_closed_form_and_inference_recovers_rp() {
    let m = meanfield();
    let rp = 1.3;
    let times: Vec<f64> = (0..100).map(|i| i as f64 * 30.0 / rp / 99.0).collect();
    let mut out = vec![0.0; times.len()];
    let st = unsafe { meeql_model_predict(m, rp, 0.05, times.as_ptr(), times.len(), out.as_mut_ptr()) };
    assert_eq!(st, MeeqlStatus::Ok);
    for (t, v) in times.iter().zip(&out) {
        assert!((v - logistic_solution(rp, 0.05, *t)).abs() < 1e-7);
    }

    let (mut rp_hat, mut sse) = (0.0, -1.0);
    let st = unsafe {
        meeql_infer_rp(m, times.as_ptr(), out.as_ptr(), out.len(), 0.005, 6.0, &mut rp_hat, &mut sse)
    };
    assert_eq!(st, MeeqlStatus::Ok, "{}", last_error());
    assert!((rp_hat - rp).abs() / rp < 1e-4);
    assert!(sse >= 0.0 && sse < 1e-8);
    unsafe { meeql_model_free(m) };
}

#[test]
fn json_round_trip_and_parse_errors() {
    let json = CString::new(
        r#"{"kind":"es","degrees":[{"degree":1,"coeff_poly_in_rp":[0,0.5,0,0]},{"degree":2,"coeff_poly_in_rp":[0,-1,0,0]}],"retained_rp":[1,2],"discarded_rp":[]}"#,
    )
    .unwrap();
    let mut m = ptr::null_mut();
    let st = unsafe { meeql_model_from_json(json.as_ptr(), &mut m) };
    assert_eq!(st, MeeqlStatus::Ok, "{}", last_error());
    let mut kind = MeeqlModelKind::Oat;
    unsafe { meeql_model_kind(m, &mut kind) };
    assert_eq!(kind, MeeqlModelKind::Es);
    unsafe { meeql_model_free(m) };

    let bad = CString::new("{not json").unwrap();
    let mut m = ptr::null_mut();
    let st = unsafe { meeql_model_from_json(bad.as_ptr(), &mut m) };
    assert_eq!(st, MeeqlStatus::Parse);
    assert!(m.is_null());
    assert!(!last_error().is_empty());
}

#[test]
fn missing_file_is_io_error() {
    let path = CString::new("/nonexistent/model.json").unwrap();
    let mut m = ptr::null_mut();
    assert_eq!(unsafe { meeql_model_read(path.as_ptr(), &mut m) }, MeeqlStatus::Io);
}

#[test]
fn null_and_invalid_arguments() {
    assert_eq!(unsafe { meeql_model_meanfield(ptr::null_mut()) }, MeeqlStatus::NullPointer);
    assert!(last_error().contains("out"));

    let m = meanfield();
    let times = [0.0, 1.0, 2.0];
    let mut out = [0.0; 3];
    let st = unsafe { meeql_model_predict(m, -1.0, 0.05, times.as_ptr(), 3, out.as_mut_ptr()) };
    assert_eq!(st, MeeqlStatus::InvalidArgument);

    let mut rp_hat = 0.0;
    let st = unsafe {
        meeql_infer_rp(m, times.as_ptr(), out.as_ptr(), 3, 2.0, 1.0, &mut rp_hat, ptr::null_mut())
    };
    assert_eq!(st, MeeqlStatus::InvalidArgument);
    unsafe { meeql_model_free(m) };
    unsafe { meeql_model_free(ptr::null_mut()) };
}

#[test]
fn abm_simulation_is_seeded() {
    let mut p = MeeqlAbmParams {
        rp: 0.0,
        rm: 0.0,
        lattice_side: 0,
        ic_fraction: 0.0,
        t_end: 0.0,
        n_points: 0,
        seed: 0,
    };
    assert_eq!(unsafe { meeql_abm_params_default(1.0, 0.25, 7, &mut p) }, MeeqlStatus::Ok);
    assert_eq!(p.lattice_side, 120);
    p.lattice_side = 30;
    p.n_points = 20;
    let mut a = vec![0.0; 20];
    let mut b = vec![0.0; 20];
    assert_eq!(unsafe { meeql_abm_simulate(&p, 3, a.as_mut_ptr()) }, MeeqlStatus::Ok);
    assert_eq!(unsafe { meeql_abm_simulate(&p, 3, b.as_mut_ptr()) }, MeeqlStatus::Ok);
    assert_eq!(a, b);
    assert_eq!(a[0], 225.0 / 900.0);

    p.lattice_side = 1;
    assert_eq!(unsafe { meeql_abm_simulate(&p, 0, a.as_mut_ptr()) }, MeeqlStatus::InvalidArgument);
}

#[test]
fn header_declares_the_api() {
    let header = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/meeql.h")).unwrap();
    for name in [
        "meeql_model_meanfield",
        "meeql_model_from_json",
        "meeql_model_predict",
        "meeql_infer_rp",
        "meeql_abm_simulate",
        "meeql_last_error_message",
        "typedef struct MeeqlModel MeeqlModel",
        "MEEQL_STATUS_OK",
    ] {
        assert!(header.contains(name), "header lacks {name}");
    }
}
