mod common;

use std::collections::BTreeMap;

use common::iso;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use vesselfuse::metrics::*;
use vesselfuse::partition::*;
use vesselfuse::phantom::{self, Segment, YParams};
use vesselfuse::skeleton::{build_graph, distance_transform, skeletonize, skeletonize_with, VesselGraph};
use vesselfuse::{BinaryMask, Geometry, Volume};

fn graph_of(gt: &BinaryMask) -> VesselGraph {
    let d = distance_transform(gt).unwrap();
    build_graph(&skeletonize_with(gt, &d).unwrap(), &d).unwrap()
}

fn dilate1(m: &BinaryMask) -> BinaryMask {
    let g = *m.geometry();
    BinaryMask::from_fn(g, |x, y, z| {
        let c = [x, y, z];
        (-1isize..=1).any(|dz| {
            (-1isize..=1).any(|dy| (-1isize..=1).any(|dx| g.offset_index(c, [dx, dy, dz]).is_some_and(|q| m.is_set(q))))
        })
    })
}

fn tube_mask(g: Geometry, x: f64, r: f64) -> BinaryMask {
    let c = phantom::center_mm(&g);
    phantom::rasterize(g, &[Segment::cylinder([x, c[1], 4.0], [x, c[1], 36.0], r)])
}

fn random_mask(seed: u64, g: Geometry, p: f64) -> BinaryMask {
    use rand::Rng;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    BinaryMask::from_fn(g, |_, _, _| rng.gen_bool(p))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn dice_symmetric_and_bounded(a in any::<u64>(), b in any::<u64>(), pa in 0.0f64..1.0, pb in 0.0f64..1.0) {
        let g = iso([8, 7, 6], 1.0);
        let (x, y) = (random_mask(a, g, pa), random_mask(b, g, pb));
        let (d1, d2) = (dice(&x, &y).unwrap(), dice(&y, &x).unwrap());
        prop_assert_eq!(d1, d2);
        prop_assert!((0.0..=1.0).contains(&d1));
        let c = cl_dice(&x, &y).unwrap();
        prop_assert!((0.0..=1.0).contains(&c));
        prop_assert_eq!(cl_dice(&x, &x).unwrap(), 1.0);
        let full = BinaryMask::from_fn(g, |_, _, _| true);
        prop_assert_eq!(masked_metric(&x, &y, &full, Metric::Dice).unwrap(), Some(d1));
        prop_assert_eq!(masked_metric(&x, &y, &full, Metric::ClDice).unwrap(), Some(c));
    }
}

#[test]
fn dice_half_overlap() {
    let g = iso([20, 10, 1], 1.0);
    let p = BinaryMask::from_fn(g, |x, y, _| x < 10 && y < 10);
    let q = BinaryMask::from_fn(g, |x, y, _| (5..15).contains(&x));
    assert_eq!((p.count(), q.count(), p.intersection_count(&q)), (100, 100, 50));
    assert_eq!(dice(&p, &q).unwrap(), 0.5);
    assert!(dice(&p, &BinaryMask::empty(iso([20, 10, 2], 1.0))).is_err());
}

#[test]
fn cl_dice_of_dilated_prediction() {
    let g = iso([24, 24, 40], 1.0);
    let gt = tube_mask(g, 11.5, 2.5);
    let pred = dilate1(&gt);
    let sp = skeletonize(&pred).unwrap();
    let tprec = sp.intersection_count(&gt) as f64 / sp.count() as f64;
    let want = 2.0 * tprec / (1.0 + tprec);
    let parts = cl_dice_parts(&pred, &gt).unwrap();
    assert_eq!(parts.tsens, 1.0);
    assert!((parts.cl_dice - want).abs() < 1e-12);
}

#[test]
fn cl_dice_missing_tube_counts() {
    let g = iso([40, 20, 40], 1.0);
    let (a, b) = (tube_mask(g, 9.5, 2.0), tube_mask(g, 29.5, 3.0));
    let gt = a.or(&b);
    let (sa, sb) = (skeletonize(&a).unwrap().count() as f64, skeletonize(&b).unwrap().count() as f64);
    // Prediction keeps tube a only: Tprec = 1, Tsens = sa / (sa + sb).
    let want = 2.0 * sa / (2.0 * sa + sb);
    assert!((cl_dice(&a, &gt).unwrap() - want).abs() < 1e-12);
}

#[test]
fn deletion_counting_oracle() {
    let g = iso([24, 24, 40], 1.0);
    let gt = tube_mask(g, 11.5, 3.0);
    let cut = BinaryMask::from_fn(g, |_, _, z| (18..21).contains(&z));
    let pred = gt.minus(&cut);
    let removed = gt.intersection_count(&cut) as f64;
    let n = gt.count() as f64;
    assert!((dice(&pred, &gt).unwrap() - 2.0 * (n - removed) / (2.0 * n - removed)).abs() < 1e-12);

    let (sg, sp) = (skeletonize(&gt).unwrap(), skeletonize(&pred).unwrap());
    let tprec = sp.intersection_count(&gt) as f64 / sp.count() as f64;
    let tsens = sg.intersection_count(&pred) as f64 / sg.count() as f64;
    assert_eq!(tprec, 1.0);
    let want = 2.0 * tprec * tsens / (tprec + tsens);
    let got = cl_dice(&pred, &gt).unwrap();
    assert!((got - want).abs() < 1e-12);
    // A centerline break costs clDice relatively more than Dice.
    let dice_drop = 1.0 - dice(&pred, &gt).unwrap();
    assert!(1.0 - got > dice_drop, "clDice drop {} vs dice drop {dice_drop}", 1.0 - got);
}

#[test]
fn psnr_noise_oracle() {
    let g = iso([40, 40, 40], 1.0);
    let gt = tube_mask(g, 19.5, 4.0);
    let noise = Normal::new(0.0, 0.1).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let vol: Volume<f64> = Volume::new(
        g,
        gt.data().iter().map(|&m| if m == 1 { 1.0 } else { noise.sample(&mut rng) }).collect(),
    )
    .unwrap();
    let db = psnr(&vol, &gt).unwrap();
    assert!((db - 20.0).abs() <= 0.5, "{db}");
    for k in [0.01, 3.0, 250.0] {
        assert!((psnr(&vol.map(|v| v * k), &gt).unwrap() - db).abs() < 1e-9);
    }
    assert_eq!(psnr(&gt.to_volume::<f64>(), &gt).unwrap(), f64::INFINITY);
}

#[test]
fn aggregate_examples() {
    let g = iso([10, 10, 10], 1.0);
    let gt = BinaryMask::from_fn(g, |x, _, _| x < 5);
    let mk = |case: &str, d: f64, with_small: bool| {
        let regions = if with_small {
            BTreeMap::from([("small".to_string(), gt.clone())])
        } else {
            BTreeMap::new()
        };
        let mut r = evaluate_case(case, &gt, &gt, &regions).unwrap();
        r.regions[0].dice = Some(d);
        r
    };
    let one = aggregate_report(&[mk("a", 0.4, true)]).unwrap();
    assert_eq!(one.region("global").unwrap().dice.unwrap(), Summary { n: 1, mean: 0.4, std: 0.0 });
    let two = aggregate_report(&[mk("a", 0.4, true), mk("b", 0.6, false)]).unwrap();
    let s = two.region("global").unwrap().dice.unwrap();
    assert!((s.mean - 0.5).abs() < 1e-15 && (s.std - 0.1414).abs() < 1e-4);
    let three = aggregate_report(&[mk("a", 0.4, true), mk("b", 0.6, false), mk("c", 0.5, true)]).unwrap();
    assert_eq!(three.region("small").unwrap().dice.unwrap().n, 2);
    assert!(three.region("large").unwrap().dice.is_none());
    assert!(aggregate_report(&[]).is_err());

    let mut csv = Vec::new();
    three.write_csv(&mut csv).unwrap();
    assert!(String::from_utf8(csv).unwrap().starts_with("region,metric,n,mean,std\n"));
}

#[test]
fn report_json_and_csv() {
    let g = iso([10, 10, 10], 1.0);
    let gt = BinaryMask::from_fn(g, |x, y, _| x < 5 && y < 5);
    let r = evaluate_case("case, one", &gt, &gt, &BTreeMap::new()).unwrap();
    assert!(r.regions.iter().filter(|s| s.present).all(|s| s.dice == Some(1.0) && s.cl_dice == Some(1.0)));
    let back: MetricsReport = serde_json::from_str(&r.to_json().unwrap()).unwrap();
    assert_eq!(back, r);
    let mut out = Vec::new();
    r.write_csv(&mut out).unwrap();
    let text = String::from_utf8(out).unwrap();
    assert_eq!(text.lines().count(), 1 + 2 * REGIONS.len());
    assert!(text.contains("\"case, one\",global,dice,1"));
}

#[test]
fn single_tube_is_all_small() {
    let g = iso([24, 24, 40], 1.0);
    let gt = tube_mask(g, 11.5, 1.2);
    let pm = partition(&graph_of(&gt), &gt, &SizeIntervals::ircad(), BifurcationRadius::default()).unwrap();
    assert_eq!(pm.class(SizeClass::Small).unwrap(), &gt);
    assert!(pm.class(SizeClass::Medium).unwrap().is_empty());
    assert!(pm.class(SizeClass::Large).unwrap().is_empty());
    assert!(pm.m_bif.is_empty());
}

#[test]
fn two_tubes_partition_and_masked_dice() {
    let g = iso([48, 28, 40], 1.0);
    let (a, b) = (tube_mask(g, 8.5, 1.2), tube_mask(g, 30.5, 4.5));
    let gt = a.or(&b);
    let pm = partition(&graph_of(&gt), &gt, &SizeIntervals::ircad(), BifurcationRadius::default()).unwrap();
    assert_eq!(pm.class(SizeClass::Small).unwrap(), &a);
    assert_eq!(pm.class(SizeClass::Large).unwrap(), &b);
    let small = pm.class(SizeClass::Small).unwrap();
    assert_eq!(masked_metric(&a, &gt, small, Metric::Dice).unwrap(), Some(1.0));
    assert!(dice(&a, &gt).unwrap() < 1.0);
    let nowhere = BinaryMask::from_fn(g, |x, y, z| (x, y, z) == (0, 0, 0));
    assert_eq!(masked_metric(&a, &gt, &nowhere, Metric::ClDice).unwrap(), None);
}

#[test]
fn y_partition_covers_ground_truth() {
    let p = phantom::y_junction::<f32>(iso([160, 160, 160], 0.5), YParams::default(), 1.0).unwrap();
    let gr = graph_of(&p.gt);
    let classes = classify_branches(&gr, &SizeIntervals::ircad());
    let mut sorted: Vec<(f64, SizeClass)> = gr.branches.iter().map(|b| b.size_mm).zip(classes).collect();
    sorted.sort_by(|x, y| x.0.total_cmp(&y.0));
    assert_eq!(sorted.iter().map(|s| s.1).collect::<Vec<_>>(), [SizeClass::Small, SizeClass::Small, SizeClass::Large]);

    let pm = partition(&gr, &p.gt, &SizeIntervals::ircad(), BifurcationRadius::default()).unwrap();
    assert_eq!(pm.union(), p.gt);
    for (_, m) in &pm.classes {
        assert!(m.is_subset_of(&p.gt));
    }
    assert!(!pm.m_bif.is_empty() && pm.m_bif.is_subset_of(&p.gt));
    let j = gr.bifurcations().next().unwrap();
    assert!(pm.m_bif.is_set(j.center));

    let mut last = 0;
    for r in [0.0, 1.0, 2.5, 5.0, 10.0] {
        let m = bifurcation_mask(&gr, &p.gt, BifurcationRadius::Fixed(r)).unwrap();
        assert!(m.count() >= last);
        last = m.count();
        if r == 0.0 {
            assert_eq!(m, BinaryMask::from_indices(*p.gt.geometry(), j.voxels.iter().copied()));
        }
    }
    let side = pm.sidecar(&gr);
    assert_eq!(side.intervals["small"], "[0,3]");
    assert_eq!(side.intervals["medium"], "]3,6]");
    assert_eq!(side.intervals["large"], "]6,+∞[");
}

#[test]
fn bullitt_has_two_masks() {
    let g = iso([24, 24, 40], 1.0);
    let gt = tube_mask(g, 11.5, 2.0);
    let pm = partition(&graph_of(&gt), &gt, &SizeIntervals::bullitt(), BifurcationRadius::default()).unwrap();
    assert_eq!(pm.classes.len(), 2);
    assert!(pm.class(SizeClass::Large).is_none());
    assert_eq!(pm.class(SizeClass::Medium).unwrap(), &gt);
}
