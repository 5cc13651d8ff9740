use regionwise::oracle::FnClassifier;
use regionwise::shapes::scale_sweep;
use regionwise::{
    rasterize_shape, refine_shape, Color, Image, Objective, Oracle, PatchArea, Rect, ShapeKind,
    ShapeSearch,
};

/// True-class probability grows with the number of black pixels, so the
/// untargeted score is `-area` up to a monotone map.
fn area_oracle(w: usize, h: usize) -> Oracle {
    Oracle::new(FnClassifier::new(2, (w, h), move |img| {
        let black = (0..h)
            .flat_map(|y| (0..w).map(move |x| (x, y)))
            .filter(|&(x, y)| img.pixel(x, y) == [0.0; 3])
            .count();
        let p = 0.5 + 0.5 * black as f64 / (w * h) as f64;
        vec![p, 1.0 - p]
    }))
}

fn white(w: usize, h: usize) -> Image {
    Image::filled(w, h, Color::WHITE).unwrap()
}

#[test]
fn smallest_mask_wins_under_negative_area_score() {
    for rect in [
        Rect::new(4, 4, 8, 8).unwrap(),
        Rect::new(2, 5, 9, 6).unwrap(),
        Rect::new(0, 0, 5, 7).unwrap(),
    ] {
        let oracle = area_oracle(16, 16);
        let search = ShapeSearch::default();
        let out = refine_shape(
            &oracle,
            &[white(16, 16)],
            rect,
            Color::BLACK,
            &search,
            Objective::Untargeted(0),
            256,
            None,
        )
        .unwrap();

        // Enumerate every candidate mask and keep the first of minimal area.
        let mut best: Option<(usize, ShapeKind, f64)> = None;
        for &kind in &search.kinds {
            for s in scale_sweep(kind, &rect, search.steps) {
                let Ok(m) = rasterize_shape(kind, rect.center(), s, 16, 16) else {
                    continue;
                };
                if best.is_none_or(|(a, _, _)| m.area() < a) {
                    best = Some((m.area(), kind, s));
                }
            }
        }
        let (area, kind, scale) = best.unwrap();
        assert!(area < rect.area());
        assert!(!out.kept_rect);
        match &out.perturbation.area {
            PatchArea::Shape { mask } => {
                assert_eq!(mask.area(), area);
                assert_eq!(mask.kind, kind);
                assert_eq!(mask.scale, scale);
            }
            other => panic!("expected a shape, got {other:?}"),
        }
        // Smallest masks come from the inscribed end of the sweep.
        assert_eq!(scale, kind.inscribed_scale(&rect));
    }
}

#[test]
fn no_kinds_returns_the_rectangle() {
    let oracle = area_oracle(8, 8);
    let rect = Rect::new(1, 1, 4, 4).unwrap();
    let search = ShapeSearch {
        kinds: vec![],
        steps: 8,
    };
    let out = refine_shape(&oracle, &[white(8, 8)], rect, Color::BLACK, &search, Objective::Untargeted(0), 64, Some(-0.6)).unwrap();
    assert!(out.kept_rect);
    assert_eq!(out.perturbation.area, PatchArea::from(rect));
    assert_eq!(oracle.ledger().total(), 0);
}

#[test]
fn never_worse_than_rectangle_and_bounded_cost() {
    // Score rewards area, so the rectangle should survive unless a larger
    // mask fits the budget.
    let oracle = Oracle::new(FnClassifier::new(2, (16, 16), |img| {
        let black = (0..16)
            .flat_map(|y| (0..16).map(move |x| (x, y)))
            .filter(|&(x, y)| img.pixel(x, y) == [0.0; 3])
            .count();
        let p = 1.0 - 0.5 * black as f64 / 256.0;
        vec![p, 1.0 - p]
    }));
    let rect = Rect::new(4, 4, 6, 6).unwrap();
    let ensemble = [white(16, 16), white(16, 16)];
    for a_max in [36, 40, 60] {
        let before = oracle.ledger().total();
        let out = refine_shape(&oracle, &ensemble, rect, Color::BLACK, &ShapeSearch::default(), Objective::Untargeted(0), a_max, None).unwrap();
        let spent = oracle.ledger().total() - before;
        assert!(spent <= (3 * 8 + 1) * 2);
        assert!(out.perturbation.area.area() <= a_max.max(36));
        let rect_score = -(1.0 - 0.5 * 36.0 / 256.0);
        assert!(out.score >= rect_score);
        for c in &out.candidates {
            if c.area > a_max {
                assert!(c.score.is_none());
            }
        }
        if a_max == 36 {
            assert!(out.kept_rect);
        } else {
            assert!(!out.kept_rect);
        }
    }
}

#[test]
fn one_step_sweep_is_rejected() {
    let oracle = area_oracle(8, 8);
    let search = ShapeSearch {
        kinds: vec![ShapeKind::Circle],
        steps: 1,
    };
    let rect = Rect::new(0, 0, 4, 4).unwrap();
    assert!(refine_shape(&oracle, &[white(8, 8)], rect, Color::BLACK, &search, Objective::Untargeted(0), 64, None).is_err());
}
