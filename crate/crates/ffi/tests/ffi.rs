//! Exercise the C ABI from Rust: handle lifecycle, status codes, error
//! messages, and numeric parity with the underlying library.

use std::ffi::{c_char, CString};
use std::io::Write;
use std::ptr;

use laneintrude::harness::{prepare_sample, train, PipelineConfig, TrainConfig};
use laneintrude::psrnet::{PsrNet, PsrNetConfig};
use laneintrude::scenegen::{
    derive_seed, generate_dataset, render_detections, simulate_scene, Label, ScenarioConfig,
    SensorConfig,
};
use laneintrude_ffi::*;

fn frames_jsonl(seed: u64) -> String {
    let cfg = ScenarioConfig::default().with_label(Label::LeftToRight);
    let scene = simulate_scene(&cfg, seed).unwrap();
    let (frames, _) = render_detections(&scene, &SensorConfig::default(), derive_seed(seed, 1))
        .unwrap();
    let mut out = String::new();
    for f in &frames {
        out.push_str(&serde_json::to_string(f).unwrap());
        out.push('\n');
    }
    out
}

fn last_error() -> String {
    let mut buf = vec![0u8; 256];
    let n = unsafe { li_last_error_message(buf.as_mut_ptr() as *mut c_char, buf.len()) };
    buf.truncate(n.min(buf.len() - 1));
    String::from_utf8_lossy(&buf).trim_end_matches('\0').to_string()
}

#[test]
fn pipeline_series_matches_library() {
    let jsonl = frames_jsonl(3);
    let c_jsonl = CString::new(jsonl.clone()).unwrap();
    unsafe {
        let pipe = li_pipeline_new_default();
        assert!(!pipe.is_null());
        let mut series: *mut LiSeries = ptr::null_mut();
        let status = li_pipeline_run(pipe, c_jsonl.as_ptr(), &mut series);
        assert_eq!(status, LiStatus::Ok, "{}", last_error());
        assert!(!series.is_null());

        // parity with the direct library call
        let frames = laneintrude::ingest::parse_frames(jsonl.as_bytes()).unwrap();
        let expected = prepare_sample(
            &frames,
            Label::NoIntrusion,
            0,
            &PipelineConfig::default(),
        )
        .unwrap();
        let len = li_series_len(series);
        assert_eq!(len, expected.series.values.len());
        let values = std::slice::from_raw_parts(li_series_values(series), len);
        assert_eq!(values, expected.series.values.as_slice());
        let frames_ptr = std::slice::from_raw_parts(li_series_frames(series), len);
        assert_eq!(frames_ptr, expected.series.frames.as_slice());

        li_series_free(series);
        li_pipeline_free(pipe);
    }
}

#[test]
fn null_and_bad_inputs_produce_status_codes() {
    unsafe {
        let mut series: *mut LiSeries = ptr::null_mut();
        assert_eq!(
            li_pipeline_run(ptr::null(), ptr::null(), &mut series),
            LiStatus::NullArgument
        );

        let pipe = li_pipeline_new_default();
        let garbage = CString::new("not json").unwrap();
        assert_eq!(
            li_pipeline_run(pipe, garbage.as_ptr(), &mut series),
            LiStatus::Parse
        );
        assert!(!last_error().is_empty());

        // markings only, no boxes: the tracker finds nothing
        let empty_frames = CString::new(
            r#"{"frame_index":0,"timestamp_s":0.0,"boxes":[],"left_marking":[[1,2],[3,4]],"right_marking":[[5,6],[7,8]]}"#,
        )
        .unwrap();
        assert_eq!(
            li_pipeline_run(pipe, empty_frames.as_ptr(), &mut series),
            LiStatus::Data
        );

        let missing = CString::new("/nonexistent/frames.jsonl").unwrap();
        assert_eq!(
            li_pipeline_run_file(pipe, missing.as_ptr(), &mut series),
            LiStatus::Io
        );
        li_pipeline_free(pipe);

        let bad_json = CString::new("{").unwrap();
        assert!(li_pipeline_new_json(bad_json.as_ptr()).is_null());

        let good_json = CString::new(r#"{"gate_px": 50.0}"#).unwrap();
        let pipe2 = li_pipeline_new_json(good_json.as_ptr());
        assert!(!pipe2.is_null());
        li_pipeline_free(pipe2);
    }
}

#[test]
fn model_round_trip_and_prediction_parity() {
    // Train a tiny model, save it, load through the C ABI, compare
    // predictions on fresh windows.
    let samples = generate_dataset(3, &ScenarioConfig::default(), &SensorConfig::default(), 77)
        .unwrap();
    let (prepared, _) = laneintrude::harness::prepare_dataset(&samples, &PipelineConfig::default());
    let windows: Vec<_> = prepared.iter().flat_map(|p| p.windows.iter().cloned()).collect();
    let train_cfg = TrainConfig {
        epochs: 10,
        ..TrainConfig::default()
    };
    let (model, _) = train(&windows, &PsrNetConfig::default(), &train_cfg).unwrap();

    let dir = std::env::temp_dir().join(format!("li_ffi_test_{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let ckpt_path = dir.join("model.json");
    {
        let mut f = std::fs::File::create(&ckpt_path).unwrap();
        model.save_checkpoint(&mut f).unwrap();
        f.flush().unwrap();
    }

    unsafe {
        let c_path = CString::new(ckpt_path.to_str().unwrap()).unwrap();
        let mut handle: *mut LiModel = ptr::null_mut();
        let status = li_model_load(c_path.as_ptr(), &mut handle);
        assert_eq!(status, LiStatus::Ok, "{}", last_error());
        assert_eq!(li_model_window_len(handle), 24);
        assert_eq!(li_model_classes(handle), 3);

        let reloaded = PsrNet::load_checkpoint(std::fs::File::open(&ckpt_path).unwrap()).unwrap();
        for p in prepared.iter().take(6) {
            let mut probs = [0.0f64; 3];
            let mut class = usize::MAX;
            let status = li_model_predict(
                handle,
                p.last.values().as_ptr(),
                p.last.values().len(),
                probs.as_mut_ptr(),
                &mut class,
            );
            assert_eq!(status, LiStatus::Ok);
            let fwd = reloaded.forward(p.last.values()).unwrap();
            for (a, b) in probs.iter().zip(&fwd.probs) {
                assert_eq!(a, b, "probability mismatch");
            }
            let expected_class = fwd
                .probs
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.total_cmp(b.1))
                .unwrap()
                .0;
            assert_eq!(class, expected_class);
        }

        // wrong window length -> shape error
        let short = [0.0f64; 5];
        assert_eq!(
            li_model_predict(handle, short.as_ptr(), 5, ptr::null_mut(), ptr::null_mut()),
            LiStatus::ShapeMismatch
        );

        li_model_free(handle);
    }
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn series_prediction_uses_the_last_window() {
    let jsonl = frames_jsonl(9);
    let c_jsonl = CString::new(jsonl).unwrap();
    let samples = generate_dataset(2, &ScenarioConfig::default(), &SensorConfig::default(), 5)
        .unwrap();
    let (prepared, _) = laneintrude::harness::prepare_dataset(&samples, &PipelineConfig::default());
    let windows: Vec<_> = prepared.iter().flat_map(|p| p.windows.iter().cloned()).collect();
    let (model, _) = train(
        &windows,
        &PsrNetConfig::default(),
        &TrainConfig {
            epochs: 5,
            ..TrainConfig::default()
        },
    )
    .unwrap();
    let dir = std::env::temp_dir().join(format!("li_ffi_series_{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let ckpt_path = dir.join("model.json");
    model
        .save_checkpoint(std::fs::File::create(&ckpt_path).unwrap())
        .unwrap();

    unsafe {
        let pipe = li_pipeline_new_default();
        let mut series: *mut LiSeries = ptr::null_mut();
        assert_eq!(li_pipeline_run(pipe, c_jsonl.as_ptr(), &mut series), LiStatus::Ok);

        let c_path = CString::new(ckpt_path.to_str().unwrap()).unwrap();
        let mut handle: *mut LiModel = ptr::null_mut();
        assert_eq!(li_model_load(c_path.as_ptr(), &mut handle), LiStatus::Ok);

        let mut class = usize::MAX;
        let status = li_model_predict_series(handle, series, ptr::null_mut(), &mut class);
        assert_eq!(status, LiStatus::Ok, "{}", last_error());
        assert!(class < 3);

        // must equal predicting the last window manually
        let len = li_series_len(series);
        let values = std::slice::from_raw_parts(li_series_values(series), len);
        let mut manual_class = usize::MAX;
        assert_eq!(
            li_model_predict(
                handle,
                values[len - 24..].as_ptr(),
                24,
                ptr::null_mut(),
                &mut manual_class
            ),
            LiStatus::Ok
        );
        assert_eq!(class, manual_class);

        li_model_free(handle);
        li_series_free(series);
        li_pipeline_free(pipe);
    }
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn version_is_a_valid_string() {
    let v = unsafe { std::ffi::CStr::from_ptr(li_version()) };
    assert!(!v.to_str().unwrap().is_empty());
}
