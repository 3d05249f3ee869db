use volgraph_core::synth::{make_dataset, synth_generate, DomainKind, SynthConfig};
use volgraph_core::volume::{ClassLabel, Domain, MapVariant};

fn mean_at(v: &volgraph_core::Volume, pts: &[[f32; 3]]) -> f64 {
    let d = v.dims();
    let s: f64 = pts
        .iter()
        .map(|p| {
            let c = |a: usize| (p[a].round().max(0.0) as usize).min(d[a] - 1);
            v.get(c(0), c(1), c(2)) as f64
        })
        .sum();
    s / pts.len() as f64
}

#[test]
fn classes_separate_at_their_centers() {
    let cfg = SynthConfig::default();
    let samples = make_dataset(&cfg, 15, &[DomainKind::Healthy], MapVariant::Full, 2024).unwrap();
    let samples = &samples[..100];
    let mut ok = 0;
    for s in samples {
        let own = mean_at(&s.volume, &cfg.voxel_centers(s.label));
        let others: Vec<[f32; 3]> = ClassLabel::ALL
            .iter()
            .filter(|&&c| c != s.label)
            .flat_map(|&c| cfg.voxel_centers(c))
            .collect();
        if own > mean_at(&s.volume, &others) {
            ok += 1;
        }
    }
    assert!(ok >= 95, "{ok}/100");
}

#[test]
fn generation_is_byte_identical() {
    let cfg = SynthConfig::default();
    let a = synth_generate(
        &cfg,
        ClassLabel::Lang,
        Domain::Healthy,
        MapVariant::Thresholded,
        5,
    )
    .unwrap();
    let b = synth_generate(
        &cfg,
        ClassLabel::Lang,
        Domain::Healthy,
        MapVariant::Thresholded,
        5,
    )
    .unwrap();
    let bits = |v: &[f32]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
    assert_eq!(bits(a.volume.data()), bits(b.volume.data()));
    assert!(a
        .volume
        .data()
        .iter()
        .all(|&v| v == 0.0 || (cfg.threshold..=1.0).contains(&v)));
}
