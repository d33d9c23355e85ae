use rtvlab_core::datasets::{generate, DatasetSpec};
use rtvlab_core::experiments::*;
use rtvlab_core::nn::{Crossing, TrainConfig};
use rtvlab_core::{AxisBox, BoxUnion, Sampler};

fn mini_data() -> rtvlab_core::datasets::GeneratedDataset {
    let spec = DatasetSpec::new(AxisBox::cube(2, 0.2, 0.8).unwrap(), 400, 100, 100, 5).unwrap();
    generate(&spec).unwrap()
}

fn mini_config(widths: Vec<usize>, seeds: Vec<u64>) -> SweepConfig {
    SweepConfig {
        widths,
        seeds,
        train: TrainConfig { epochs: 4, batch_size: 32, mse_targets: vec![0.4, 0.25, 1e-6], ..Default::default() },
        threshold: ThresholdPolicy::default(),
    }
}

#[test]
fn sweep_is_deterministic_and_ordered() {
    let data = mini_data();
    let cfg = mini_config(vec![8, 4], vec![3, 1]);
    let a = width_sweep(&data, &cfg, Some(1)).unwrap();
    let b = width_sweep(&data, &cfg, None).unwrap();
    assert_eq!(a.report_csv().unwrap(), b.report_csv().unwrap());
    let order: Vec<(usize, u64)> = a.cells.iter().map(|c| (c.width, c.seed)).collect();
    assert_eq!(order, vec![(8, 3), (8, 1), (4, 3), (4, 1)]);
    for c in &a.cells {
        assert!(c.val_iou_tau_star >= 0.0 && c.val_iou_tau_star <= 1.0);
        assert_eq!(c.trace.records.len(), 5);
    }
}

#[test]
fn run_directory_layout() {
    let data = mini_data();
    let run = width_sweep(&data, &mini_config(vec![4], vec![0, 1]), Some(1)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    run.write_dir(dir.path(), None).unwrap();
    for f in ["config.json", "dataset.json", "report.csv", "frontier.csv", "metadata.json"] {
        assert!(dir.path().join(f).is_file(), "{f}");
    }
    let t0 = std::fs::read_to_string(dir.path().join("traces/w4_s0.csv")).unwrap();
    let t1 = std::fs::read_to_string(dir.path().join("traces/w4_s1.csv")).unwrap();
    assert_ne!(t0, t1);
    for t in [t0, t1] {
        let mut rd = csv::Reader::from_reader(t.as_bytes());
        assert_eq!(rd.headers().unwrap(), vec!["epoch", "train_mse", "val_mse", "rtv_proxy"]);
        assert_eq!(rd.records().count(), 5);
    }
    let report = std::fs::read_to_string(dir.path().join("report.csv")).unwrap();
    assert_eq!(report.lines().count(), 3);
    assert_eq!(ExperimentRun::read_dir(dir.path()).unwrap(), run);
}

#[test]
fn frontier_averages_and_omits() {
    let data = mini_data();
    let mut run = width_sweep(&data, &mini_config(vec![4], vec![0, 1]), Some(1)).unwrap();
    run.config.train.mse_targets = vec![0.20, 0.25, 0.30, 0.40];
    let crossings = |proxy: f64| {
        vec![
            Crossing { target: 0.20, epoch: None, rtv_proxy: None },
            Crossing { target: 0.25, epoch: Some(3), rtv_proxy: Some(proxy) },
            Crossing { target: 0.30, epoch: Some(2), rtv_proxy: Some(proxy - 1.0) },
            Crossing { target: 0.40, epoch: Some(1), rtv_proxy: Some(proxy - 2.0) },
        ]
    };
    run.cells[0].trace.crossings = crossings(10.0);
    run.cells[1].trace.crossings = crossings(14.0);
    let rep = frontier_report(&run);
    assert!(rep.warning.is_none());
    let targets: Vec<f64> = rep.rows.iter().map(|r| r.target_mse).collect();
    assert_eq!(targets, vec![0.25, 0.30, 0.40]);
    assert_eq!(rep.rows[0].rtv_proxy_at_cross, 12.0);
    assert_eq!(rep.rows[0].seeds_crossed, 2);

    for c in &mut run.cells {
        c.trace.crossings.iter_mut().for_each(|x| *x = Crossing { epoch: None, rtv_proxy: None, ..*x });
    }
    let empty = frontier_report(&run);
    assert!(empty.rows.is_empty() && empty.warning.is_some());
    assert_eq!(empty.to_csv().unwrap().lines().count(), 1);
}

#[test]
fn barrier_ladder() {
    let u = BoxUnion::single(AxisBox::cube(2, 0.25, 0.75).unwrap());
    let ladder = geometric_ladder(2.0, 2.0, 5);
    let dirac = Sampler::Dirac { point: vec![0.5, 0.5] };
    let s = barrier_sweep(&u, &ladder, 1.0, &dirac, 10_000, 1).unwrap();
    assert!(s.calibration.iter().all(|c| c.mean == 0.0));
    assert!(s.fit.is_none());
    assert!(s.rtv_bound.windows(2).all(|w| w[1] > w[0]));
    assert_eq!(s.to_csv().unwrap().lines().count(), 6);
    assert!(barrier_sweep(&u, &ladder[..4], 1.0, &dirac, 10_000, 1).is_err());
    assert!(barrier_sweep(&u, &[2.0, 4.0, 8.0, 16.0, 33.0], 1.0, &dirac, 10_000, 1).is_err());
}
