use lcengine_ffi::*;
use std::ffi::{CStr, CString};
use std::path::PathBuf;
use std::ptr;

fn example(name: &str) -> CString {
    let p = PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../core/examples")
        .join(name);
    CString::new(p.to_str().unwrap()).unwrap()
}

fn last_error() -> String {
    unsafe { CStr::from_ptr(lce_last_error_message()) }
        .to_str()
        .unwrap()
        .to_owned()
}

fn load(with_dcf: bool) -> *mut LceModel {
    let (m, db, dcf) = (
        example("heatplant.model"),
        example("heatplant_db.csv"),
        example("heatplant_dcf.csv"),
    );
    let mut model = ptr::null_mut();
    let dcf_ptr = if with_dcf { dcf.as_ptr() } else { ptr::null() };
    let status = unsafe { lce_model_load(m.as_ptr(), db.as_ptr(), dcf_ptr, &mut model) };
    assert_eq!(status, LceStatus::Ok, "{}", last_error());
    assert!(!model.is_null());
    model
}

#[test]
fn static_run_matches_library() {
    let model = load(false);
    unsafe {
        assert_eq!(lce_validate(model), LceStatus::Ok);
        let mut result = ptr::null_mut();
        assert_eq!(
            lce_run_static(model, &mut result),
            LceStatus::Ok,
            "{}",
            last_error()
        );
        let (mut rows, mut cols, mut n) = (0, 0, 0);
        assert_eq!(lce_result_shape(result, &mut rows, &mut cols), LceStatus::Ok);
        assert_eq!((rows, cols), (1, 20));
        assert_eq!(lce_result_category_count(result, &mut n), LceStatus::Ok);
        assert_eq!(n, 2);
        let name = CStr::from_ptr(lce_result_category_name(result, 0))
            .to_str()
            .unwrap();
        assert_eq!(name, "GWP100");
        assert!(lce_result_category_name(result, 2).is_null());

        let mut buf = vec![0.0; rows * cols];
        assert_eq!(
            lce_result_impact(result, 0, buf.as_mut_ptr(), buf.len()),
            LceStatus::Ok
        );
        let m =
            lcengine::io::load_model(PathBuf::from(example("heatplant.model").to_str().unwrap())).unwrap();
        let db =
            lcengine::io::load_background_db(PathBuf::from(example("heatplant_db.csv").to_str().unwrap()))
                .unwrap();
        let direct = lcengine::run_matrix(&m, &db).unwrap();
        assert_eq!(buf, direct.impacts["GWP100"].as_slice());
        assert_eq!(
            lce_result_cost(result, buf.as_mut_ptr(), buf.len()),
            LceStatus::Ok
        );
        assert_eq!(buf, direct.cost.as_slice());

        assert_eq!(
            lce_result_impact(result, 0, buf.as_mut_ptr(), 3),
            LceStatus::BufferTooSmall
        );
        assert_eq!(
            lce_result_impact(result, 9, buf.as_mut_ptr(), buf.len()),
            LceStatus::OutOfRange
        );
        let mut steps = 0;
        assert_eq!(
            lce_result_dynamic_steps(result, &mut steps),
            LceStatus::InvalidArgument
        );
        lce_result_free(result);
        lce_model_free(model);
    }
}

#[test]
fn monte_carlo_and_dynamic() {
    let model = load(true);
    unsafe {
        let mut mc = ptr::null_mut();
        assert_eq!(lce_run_monte_carlo(model, 50, 9, &mut mc), LceStatus::Ok);
        let (mut rows, mut cols) = (0, 0);
        lce_result_shape(mc, &mut rows, &mut cols);
        assert_eq!(rows, 50);
        let mut other = ptr::null_mut();
        assert_eq!(
            lce_run_monte_carlo(model, 0, 9, &mut other),
            LceStatus::InvalidArgument
        );
        assert!(other.is_null());

        let mut dy = ptr::null_mut();
        assert_eq!(lce_run_dynamic(model, &mut dy), LceStatus::Ok, "{}", last_error());
        let mut steps = 0;
        assert_eq!(lce_result_dynamic_steps(dy, &mut steps), LceStatus::Ok);
        assert_eq!(steps, 20 + 101 - 1);
        let mut buf = vec![0.0; steps];
        assert_eq!(
            lce_result_dynamic_impact(dy, 0, buf.as_mut_ptr(), buf.len()),
            LceStatus::Ok
        );
        assert!(buf.iter().all(|v| v.is_finite()));

        let dir = tempfile::tempdir().unwrap();
        for (res, fmt, name) in [(mc, LceFormat::Csv, "mc.csv"), (dy, LceFormat::Json, "dy.json")] {
            let path = CString::new(dir.path().join(name).to_str().unwrap()).unwrap();
            assert_eq!(lce_result_export(res, path.as_ptr(), fmt), LceStatus::Ok);
            lcengine::io::import_results(dir.path().join(name)).unwrap();
        }
        let bad = CString::new("/nonexistent/dir/x.csv").unwrap();
        assert_eq!(lce_result_export(mc, bad.as_ptr(), LceFormat::Csv), LceStatus::Io);
        lce_result_free(mc);
        lce_result_free(dy);
        lce_model_free(model);
    }
}

#[test]
fn dynamic_without_tables_uses_static_factors() {
    let model = load(false);
    unsafe {
        let mut r = ptr::null_mut();
        assert_eq!(lce_run_dynamic(model, &mut r), LceStatus::Ok, "{}", last_error());
        let mut steps = 0;
        assert_eq!(lce_result_dynamic_steps(r, &mut steps), LceStatus::Ok);
        assert_eq!(steps, 20);
        let (mut unit, mut dynamic) = (vec![0.0; 20], vec![0.0; 20]);
        lce_result_impact(r, 0, unit.as_mut_ptr(), 20);
        lce_result_dynamic_impact(r, 0, dynamic.as_mut_ptr(), 20);
        for (u, d) in unit.iter().zip(&dynamic) {
            assert!((u - d).abs() <= 1e-12 * u.abs(), "{u} vs {d}");
        }
        lce_result_free(r);
        lce_model_free(model);
    }
}

#[test]
fn load_errors() {
    let db = example("heatplant_db.csv");
    let missing = CString::new("/nonexistent.model").unwrap();
    let mut model = ptr::null_mut();
    unsafe {
        assert_eq!(
            lce_model_load(missing.as_ptr(), db.as_ptr(), ptr::null(), &mut model),
            LceStatus::Io
        );
        assert!(model.is_null());
        assert!(!last_error().is_empty());
        assert_eq!(
            lce_model_load(ptr::null(), db.as_ptr(), ptr::null(), &mut model),
            LceStatus::NullArgument
        );
        let corpus = CString::new(
            PathBuf::from(env!("CARGO_MANIFEST_DIR"))
                .join("../core/tests/corpus/model_unterminated_string.model")
                .to_str()
                .unwrap(),
        )
        .unwrap();
        assert_eq!(
            lce_model_load(corpus.as_ptr(), db.as_ptr(), ptr::null(), &mut model),
            LceStatus::Parse
        );
        assert_eq!(lce_validate(ptr::null()), LceStatus::NullArgument);
        lce_model_free(ptr::null_mut());
        lce_result_free(ptr::null_mut());
    }
}

#[test]
fn economics() {
    let mut out = 0.0;
    unsafe {
        let cf = [-100.0, 60.0, 60.0];
        assert_eq!(lce_npv(cf.as_ptr(), 3, 0.1, &mut out), LceStatus::Ok);
        assert!((out - 4.132_231_404_958_678).abs() < 1e-9);
        let (c, q) = ([100.0, 0.0], [0.0, 10.0]);
        assert_eq!(lce_msp(c.as_ptr(), q.as_ptr(), 2, 0.1, &mut out), LceStatus::Ok);
        assert!((out - 11.0).abs() < 1e-12);
        let mut l = 0.0;
        assert_eq!(lce_lcoe(c.as_ptr(), q.as_ptr(), 2, 0.1, &mut l), LceStatus::Ok);
        assert_eq!(l, out);
        let zero = [0.0, 0.0];
        assert_eq!(
            lce_msp(c.as_ptr(), zero.as_ptr(), 2, 0.1, &mut out),
            LceStatus::Numerical
        );
        assert_eq!(
            lce_npv(cf.as_ptr(), 3, -2.0, &mut out),
            LceStatus::InvalidArgument
        );
        assert_eq!(lce_npv(ptr::null(), 3, 0.1, &mut out), LceStatus::NullArgument);
        let version = CStr::from_ptr(lce_version()).to_str().unwrap();
        assert_eq!(version, env!("CARGO_PKG_VERSION"));
    }
}
