use std::ffi::{c_char, CString};
use std::ptr;

use qmcnet::bench::{evaluate_points, lookup};
use qmcnet::lds::{generate, star_discrepancy_exact, SamplerKind};
use qmcnet::net::{Activation, NetworkConfig, NetworkParams};
use qmcnet_ffi::*;

fn last_error() -> String {
    let mut buf = vec![0 as c_char; 256];
    let n = unsafe { qmc_last_error(buf.as_mut_ptr(), buf.len()) };
    let bytes: Vec<u8> = buf[..n.min(255)].iter().map(|&c| c as u8).collect();
    String::from_utf8(bytes).unwrap()
}

fn sobol(dim: usize, n: usize) -> *mut QmcPointSet {
    let mut ps = ptr::null_mut();
    assert_eq!(
        unsafe { qmc_pointset_generate(QmcSampler::Sobol, dim, n, 1, 0, &mut ps) },
        QmcStatus::Ok
    );
    ps
}

#[test]
fn point_sets_match_the_library() {
    let ps = sobol(2, 64);
    unsafe {
        assert_eq!(qmc_pointset_len(ps), 64);
        assert_eq!(qmc_pointset_dim(ps), 2);
        let coords = std::slice::from_raw_parts(qmc_pointset_coords(ps), 128);
        let expected = generate(SamplerKind::Sobol, 2, 64).unwrap();
        assert_eq!(coords, expected.as_flat());
        let mut d = 0.0;
        assert_eq!(qmc_star_discrepancy(ps, &mut d), QmcStatus::Ok);
        assert_eq!(d, star_discrepancy_exact(&expected).unwrap());
        qmc_pointset_free(ps);
    }
}

#[test]
fn benchmark_values_match_the_library() {
    let name = CString::new("owen-f34").unwrap();
    let ps = sobol(3, 100);
    let mut dim = 0;
    let mut out = vec![0.0; 100];
    unsafe {
        assert_eq!(qmc_benchmark_dim(name.as_ptr(), &mut dim), QmcStatus::Ok);
        assert_eq!(dim, 3);
        assert_eq!(
            qmc_benchmark_evaluate(name.as_ptr(), ps, out.as_mut_ptr(), out.len()),
            QmcStatus::Ok
        );
        qmc_pointset_free(ps);
    }
    let map = lookup("owen-f34").unwrap();
    let expected = evaluate_points(map.as_ref(), &generate(SamplerKind::Sobol, 3, 100).unwrap()).unwrap();
    assert_eq!(out, expected);
}

#[test]
fn errors_carry_codes_and_messages() {
    let mut ps = ptr::null_mut();
    let status = unsafe { qmc_pointset_generate(QmcSampler::Vdc, 2, 8, 1, 0, &mut ps) };
    assert_eq!(status, QmcStatus::UnsupportedDimension);
    assert!(ps.is_null());
    assert!(last_error().contains("dimension 2"), "{}", last_error());

    let name = CString::new("no-such-map").unwrap();
    let mut dim = 0;
    assert_eq!(unsafe { qmc_benchmark_dim(name.as_ptr(), &mut dim) }, QmcStatus::UnknownBenchmark);

    let ps = sobol(3, 10);
    let good = CString::new("owen-f34").unwrap();
    let mut small = [0.0; 4];
    unsafe {
        assert_eq!(
            qmc_benchmark_evaluate(good.as_ptr(), ps, small.as_mut_ptr(), small.len()),
            QmcStatus::BufferTooSmall
        );
        assert_eq!(qmc_star_discrepancy(ptr::null(), ptr::null_mut()), QmcStatus::NullPointer);
        assert_eq!(qmc_pointset_len(ptr::null()), 0);
        qmc_pointset_free(ps);
        qmc_pointset_free(ptr::null_mut());
    }

    let coords = [0.5, 1.5];
    let mut ps = ptr::null_mut();
    let status = unsafe { qmc_pointset_from_coords(coords.as_ptr(), 2, 1, &mut ps) };
    assert_eq!(status, QmcStatus::InvalidArgument);
}

#[test]
fn truncated_error_message_reports_full_length() {
    let name = CString::new("no-such-map").unwrap();
    let mut dim = 0;
    unsafe { qmc_benchmark_dim(name.as_ptr(), &mut dim) };
    let mut buf = [1 as c_char; 4];
    let n = unsafe { qmc_last_error(buf.as_mut_ptr(), buf.len()) };
    assert!(n > 3);
    assert_eq!(buf[3], 0);
}

#[test]
fn models_load_and_predict() {
    let cfg = NetworkConfig {
        input_dim: 2,
        hidden_layers: 2,
        width: 5,
        activation: Activation::Tanh,
        batch_norm: false,
    };
    let params = NetworkParams::init_xavier(cfg, 9).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("model.bin");
    params.write_to(std::fs::File::create(&file).unwrap()).unwrap();
    let path = CString::new(file.to_str().unwrap()).unwrap();

    let mut model = ptr::null_mut();
    let ps = sobol(2, 32);
    let mut out = vec![0.0; 32];
    unsafe {
        assert_eq!(qmc_model_load(path.as_ptr(), &mut model), QmcStatus::Ok);
        assert_eq!(qmc_model_input_dim(model), 2);
        assert_eq!(qmc_model_predict(model, ps, out.as_mut_ptr(), 32), QmcStatus::Ok);
        qmc_model_free(model);
        qmc_pointset_free(ps);
    }
    let expected = params.predict(generate(SamplerKind::Sobol, 2, 32).unwrap().as_flat()).unwrap();
    assert_eq!(out, expected);

    std::fs::write(&file, b"not a model").unwrap();
    let mut model = ptr::null_mut();
    assert_eq!(unsafe { qmc_model_load(path.as_ptr(), &mut model) }, QmcStatus::ModelFormat);
    let missing = CString::new(dir.path().join("missing.bin").to_str().unwrap()).unwrap();
    assert_eq!(unsafe { qmc_model_load(missing.as_ptr(), &mut model) }, QmcStatus::Io);
}

#[test]
fn header_declares_every_export() {
    let header = include_str!("../include/qmcnet.h");
    for f in [
        "qmc_last_error", "qmc_pointset_generate", "qmc_pointset_from_coords", "qmc_pointset_free",
        "qmc_pointset_len", "qmc_pointset_dim", "qmc_pointset_coords", "qmc_star_discrepancy",
        "qmc_benchmark_dim", "qmc_benchmark_evaluate", "qmc_model_load", "qmc_model_free",
        "qmc_model_input_dim", "qmc_model_predict",
    ] {
        assert!(header.contains(&format!("{f}(")), "{f} missing from header");
    }
    assert!(header.contains("typedef struct QmcPointSet QmcPointSet;"));
}
