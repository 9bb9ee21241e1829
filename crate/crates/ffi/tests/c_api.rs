use std::ffi::{CStr, CString};
use std::path::Path;
use std::ptr;

use cgstae::model::{CgstaeParams, ModelDims, WindowBatch};
use cgstae::monitoring::{calibrate, MonitorModel};
use cgstae::numerics::{sym_normalize, Matrix};
use cgstae_ffi::*;

fn series(len: usize, n: usize) -> Matrix {
    Matrix::from_fn(len, n, |t, j| ((t * (j + 2)) as f64 * 0.37).sin() + 0.1 * j as f64)
}

fn model_file(dir: &Path) -> (MonitorModel, CString) {
    let dims = ModelDims::new(3, 4, 2).unwrap();
    let params = CgstaeParams::init(dims, 1);
    let graph = Matrix::from_rows(&[&[0.0, 0.8, 0.0], &[0.0, 0.0, 0.6], &[0.0, 0.0, 0.0]]);
    let windows = WindowBatch::from_series(&series(200, 3), 4).unwrap();
    let model = calibrate(params, graph, &windows, 0.01).unwrap().model;
    let path = dir.join("monitor.json");
    model.save(&path).unwrap();
    (model, CString::new(path.to_str().unwrap()).unwrap())
}

fn last_error() -> String {
    let p = cgstae_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn monitor_round_trip_matches_library() {
    let dir = tempfile::tempdir().unwrap();
    let (model, path) = model_file(dir.path());
    let mut handle = ptr::null_mut();
    assert_eq!(unsafe { cgstae_monitor_load(path.as_ptr(), &mut handle) }, CgstaeStatus::Ok);
    assert!(cgstae_last_error().is_null());

    let (mut n, mut w) = (0usize, 0usize);
    assert_eq!(unsafe { cgstae_monitor_dims(handle, &mut n, &mut w) }, CgstaeStatus::Ok);
    assert_eq!((n, w), (3, 4));

    let (mut at2, mut aspe) = (0.0, 0.0);
    assert_eq!(unsafe { cgstae_monitor_limits(handle, &mut at2, &mut aspe) }, CgstaeStatus::Ok);
    assert_eq!((at2, aspe), (model.alpha_t2, model.alpha_spe));

    let x = series(4, 3).scale(3.0);
    let (mut t2, mut spe, mut alarm) = (0.0, 0.0, -1);
    let st = unsafe {
        cgstae_monitor_evaluate(handle, x.as_slice().as_ptr(), 4, 3, 0, &mut t2, &mut spe, &mut alarm)
    };
    assert_eq!(st, CgstaeStatus::Ok);
    let ev = model.evaluate_window(&x).unwrap();
    assert_eq!((t2, spe), (ev.t2, ev.spe));
    assert_eq!(alarm, i32::from(model.is_fault(ev.t2, ev.spe)));

    let st = unsafe {
        cgstae_monitor_evaluate(handle, x.as_slice().as_ptr(), 3, 4, 0, &mut t2, &mut spe, &mut alarm)
    };
    assert_eq!(st, CgstaeStatus::Dimension);
    assert!(last_error().contains("window"));
    unsafe { cgstae_monitor_free(handle) };
}

#[test]
fn load_errors_are_reported() {
    let mut handle = ptr::null_mut();
    let missing = CString::new("/definitely/not/here.json").unwrap();
    assert_eq!(unsafe { cgstae_monitor_load(missing.as_ptr(), &mut handle) }, CgstaeStatus::Io);
    assert!(handle.is_null());
    assert!(last_error().contains("not/here"));
    assert_eq!(
        unsafe { cgstae_monitor_load(ptr::null(), &mut handle) },
        CgstaeStatus::NullPointer
    );
    unsafe { cgstae_monitor_free(ptr::null_mut()) };
}

#[test]
fn sym_normalize_matches_library() {
    let a = Matrix::from_rows(&[&[0.0, 1.0], &[0.5, 0.0]]);
    let mut out = [0.0; 4];
    assert_eq!(
        unsafe { cgstae_sym_normalize(a.as_slice().as_ptr(), 2, out.as_mut_ptr()) },
        CgstaeStatus::Ok
    );
    assert_eq!(&out[..], sym_normalize(&a).unwrap().as_slice());
}

#[test]
fn contribution_and_kde() {
    let x = [1.0, 2.0, 3.0, 4.0];
    let xh = [0.0, 2.0, 1.0, 4.0];
    let mut vc = [0.0; 2];
    let st = unsafe { cgstae_variable_contribution(x.as_ptr(), xh.as_ptr(), 2, 2, vc.as_mut_ptr()) };
    assert_eq!(st, CgstaeStatus::Ok);
    assert_eq!(vc, [5.0, 0.0]);

    let samples: Vec<f64> = (0..500).map(|i| (i as f64 * 0.618).fract()).collect();
    let mut lim = 0.0;
    assert_eq!(
        unsafe { cgstae_kde_limit(samples.as_ptr(), samples.len(), 0.01, &mut lim) },
        CgstaeStatus::Ok
    );
    assert!(lim > 0.95 && lim < 1.1, "{lim}");
    assert_eq!(
        unsafe { cgstae_kde_limit(samples.as_ptr(), samples.len(), 1.5, &mut lim) },
        CgstaeStatus::Argument
    );
}

#[test]
fn chain_subgraph() {
    // 1 -> 2 -> 3 with faults on 1 and 3
    let a = [0.0, 0.9, 0.0, 0.0, 0.0, 0.9, 0.0, 0.0, 0.0];
    let fault = [0usize, 2];
    let (mut inside, mut src, mut normal) = ([0i32; 3], [0i32; 3], 0usize);
    let st = unsafe {
        cgstae_optimal_subgraph(
            a.as_ptr(),
            3,
            0.1,
            fault.as_ptr(),
            2,
            1,
            inside.as_mut_ptr(),
            src.as_mut_ptr(),
            &mut normal,
        )
    };
    assert_eq!(st, CgstaeStatus::Ok);
    assert_eq!(inside, [1, 1, 1]);
    assert_eq!(src, [1, 0, 0]);
    assert_eq!(normal, 1);
    let st = unsafe {
        cgstae_optimal_subgraph(
            a.as_ptr(),
            3,
            0.1,
            fault.as_ptr(),
            2,
            7,
            inside.as_mut_ptr(),
            src.as_mut_ptr(),
            &mut normal,
        )
    };
    assert_eq!(st, CgstaeStatus::Argument);
}

#[test]
fn header_compiles_as_c() {
    let header = Path::new(env!("CARGO_MANIFEST_DIR")).join("include/cgstae.h");
    let text = std::fs::read_to_string(&header).unwrap();
    for name in [
        "cgstae_monitor_load",
        "cgstae_monitor_evaluate",
        "cgstae_optimal_subgraph",
        "CGSTAE_STATUS_OK",
    ] {
        assert!(text.contains(name), "{name} missing from header");
    }
    let Ok(status) = std::process::Command::new("cc")
        .args(["-fsyntax-only", "-x", "c"])
        .arg(&header)
        .status()
    else {
        eprintln!("no C compiler; syntax check skipped");
        return;
    };
    assert!(status.success());
}
