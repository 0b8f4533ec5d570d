use std::ffi::{CStr, CString};
use std::ptr;

use swarmform_ffi::*;

fn last_error() -> String {
    unsafe { CStr::from_ptr(sf_last_error_message()) }.to_string_lossy().into_owned()
}

fn square(spacing: f64) -> *mut SfShape {
    let verts = [0.0, 0.0, 4.0, 0.0, 4.0, 4.0, 0.0, 4.0];
    let mut shape = ptr::null_mut();
    let status = unsafe { sf_shape_from_polygon(verts.as_ptr(), 4, spacing, &mut shape) };
    assert_eq!(status, SfStatus::Ok);
    shape
}

#[test]
fn version_is_nul_terminated() {
    let v = unsafe { CStr::from_ptr(sf_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn shape_round_trip() {
    let shape = square(0.5);
    unsafe {
        assert_eq!(sf_shape_len(shape), 64);
        assert_eq!(sf_shape_dim(shape), 2);
        assert_eq!(sf_shape_spacing(shape), 0.5);
        let mut buf = vec![0.0; 128];
        assert_eq!(sf_shape_points(shape, buf.as_mut_ptr(), buf.len()), SfStatus::Ok);
        assert_eq!(&buf[..4], &[0.25, 0.25, 0.75, 0.25]);
        assert_eq!(sf_shape_points(shape, buf.as_mut_ptr(), 10), SfStatus::BufferTooSmall);
        assert!(last_error().contains("128 required"));
        sf_shape_free(shape);
    }
}

#[test]
fn geometry_errors_map_to_codes() {
    let line = [0.0, 0.0, 1.0, 1.0, 2.0, 2.0];
    let mut shape = ptr::null_mut();
    let status = unsafe { sf_shape_from_polygon(line.as_ptr(), 3, 0.1, &mut shape) };
    assert_eq!(status, SfStatus::Geometry);
    assert!(shape.is_null());
    assert!(last_error().contains("zero area"));

    let status = unsafe { sf_shape_from_polygon(ptr::null(), 3, 0.1, &mut shape) };
    assert_eq!(status, SfStatus::NullPointer);
}

#[test]
fn points_and_files() {
    let coords = [0.0, 0.0, 1.0, 0.0, 0.0, 2.0];
    let mut shape = ptr::null_mut();
    unsafe {
        assert_eq!(sf_shape_from_points(coords.as_ptr(), 3, 2, &mut shape), SfStatus::Ok);
        assert_eq!(sf_shape_spacing(shape), 1.0);
        sf_shape_free(shape);
    }

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("pts.csv");
    std::fs::write(&path, "0,0\n0.5,0\n").unwrap();
    let c_path = CString::new(path.to_str().unwrap()).unwrap();
    unsafe {
        assert_eq!(sf_shape_load(c_path.as_ptr(), &mut shape), SfStatus::Ok);
        assert_eq!(sf_shape_len(shape), 2);
        sf_shape_free(shape);
    }
    let missing = CString::new(dir.path().join("nope.csv").to_str().unwrap()).unwrap();
    assert_eq!(unsafe { sf_shape_load(missing.as_ptr(), &mut shape) }, SfStatus::Io);
    assert!(last_error().contains("nope.csv"));
}

#[test]
fn simulation_lifecycle() {
    let shape = square(0.5);
    let config = CString::new("robots = 4\nduration = 1\ngamma = 4\ninit_min = [0, 0]\ninit_max = [4, 4]\n").unwrap();
    let mut sim = ptr::null_mut();
    unsafe {
        assert_eq!(sf_simulation_new(config.as_ptr(), shape, &mut sim), SfStatus::Ok);
        sf_shape_free(shape);
        assert_eq!(sf_simulation_robot_count(sim), 4);
        assert_eq!(sf_simulation_dim(sim), 2);
        assert_eq!(sf_simulation_step(sim, 10), SfStatus::Ok);
        assert!((sf_simulation_time(sim) - 0.1).abs() < 1e-12);

        let mut pos = vec![0.0; 8];
        assert_eq!(sf_simulation_positions(sim, pos.as_mut_ptr(), 8), SfStatus::Ok);
        assert!(pos.iter().all(|x| x.is_finite()));

        let mut metrics = SfMetrics::default();
        assert_eq!(sf_simulation_metrics(sim, &mut metrics), SfStatus::Ok);
        assert_eq!(metrics.n, 4);
        assert!(metrics.f.is_finite() && metrics.e_est >= 0.0);

        let extra = [2.0, 2.0];
        assert_eq!(sf_simulation_add_robots(sim, extra.as_ptr(), 1), SfStatus::Ok);
        let mut ids = vec![0u64; 5];
        assert_eq!(sf_simulation_ids(sim, ids.as_mut_ptr(), 5), SfStatus::Ok);
        assert_eq!(ids, vec![0, 1, 2, 3, 4]);

        let gone = [1u64, 77];
        assert_eq!(sf_simulation_remove_robots(sim, gone.as_ptr(), 2), SfStatus::UnknownRobot);
        assert_eq!(sf_simulation_robot_count(sim), 5);
        assert_eq!(sf_simulation_remove_robots(sim, gone.as_ptr(), 1), SfStatus::Ok);
        assert_eq!(sf_simulation_robot_count(sim), 4);
        sf_simulation_free(sim);
    }
}

#[test]
fn config_errors() {
    let shape = square(0.5);
    let mut sim = ptr::null_mut();
    let bad = CString::new("sigma_1 = 30\n").unwrap();
    let strict = CString::new("robots = 20\ngamma = 0.01\nstrict_gamma = true\n").unwrap();
    unsafe {
        assert_eq!(sf_simulation_new(bad.as_ptr(), shape, &mut sim), SfStatus::Config);
        assert!(last_error().contains("sigma_1"));
        assert_eq!(sf_simulation_new(strict.as_ptr(), shape, &mut sim), SfStatus::Config);
        assert!(last_error().contains("min_gamma"));
        assert!(sim.is_null());
        assert_eq!(sf_simulation_new(ptr::null(), ptr::null(), &mut sim), SfStatus::NullPointer);
        sf_shape_free(shape);
    }
}

#[test]
fn anneal_through_the_abi() {
    let shape = square(0.5);
    let mut beta = 0.0;
    unsafe {
        assert_eq!(sf_anneal_beta(shape, 4, 0.0, 0, &mut beta), SfStatus::Ok);
        assert_eq!(beta, 0.01);
        assert_eq!(sf_anneal_beta(shape, 0, 0.0, 0, &mut beta), SfStatus::InvalidArgument);
        sf_shape_free(shape);
    }
}

#[test]
fn null_handles_are_tolerated() {
    unsafe {
        sf_shape_free(ptr::null_mut());
        sf_simulation_free(ptr::null_mut());
        assert_eq!(sf_shape_len(ptr::null()), 0);
        assert!(sf_simulation_time(ptr::null()).is_nan());
        assert_eq!(sf_simulation_step(ptr::null_mut(), 1), SfStatus::NullPointer);
    }
}
