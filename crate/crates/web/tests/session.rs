use mgst_core::loss::LossWeights;
use mgst_core::optim::Status;
use mgst_web::{gray_rgba, to_rgba, Session, View};

#[test]
fn stepping_lowers_the_loss() {
    let mut s = Session::new(16, 3).unwrap();
    assert_eq!(s.iteration(), 0);
    let before = s.terms().total;
    assert_eq!(s.step(5).unwrap(), None);
    assert_eq!(s.iteration(), 5);
    assert!(s.terms().total < before);
    let l = s.losses();
    assert_eq!(l.len(), 6);
    assert!(l.windows(2).all(|w| w[1] <= w[0]));
}

#[test]
fn warm_start_from_content_is_already_optimal_without_style() {
    let mut s = Session::new(16, 0).unwrap();
    s.set_weights(LossWeights {
        beta: 0.0,
        theta: 0.0,
        ..LossWeights::default()
    })
    .unwrap();
    s.restart(0, true).unwrap();
    assert_eq!(s.terms().total, 0.0);
    assert_eq!(s.step(3).unwrap(), Some(Status::Converged));
    assert_eq!(s.pupil_shift().unwrap(), 0.0);
}

#[test]
fn changing_weights_keeps_the_image() {
    let mut s = Session::new(16, 1).unwrap();
    s.step(3).unwrap();
    let before = s.output().unwrap();
    s.set_weights(LossWeights {
        theta: 1.0,
        ..LossWeights::default()
    })
    .unwrap();
    assert_eq!(s.output().unwrap(), before);
    assert_eq!(s.iteration(), 0);
    assert!(s
        .set_weights(LossWeights {
            alpha: -1.0,
            ..LossWeights::default()
        })
        .is_err());
}

#[test]
fn views_and_attention_maps() {
    let s = Session::new(16, 1).unwrap();
    for v in [View::Content, View::Style, View::Output] {
        assert_eq!(to_rgba(&s.image(v).unwrap()).len(), 16 * 16 * 4);
    }
    let maps = s.attention(false).unwrap();
    assert_eq!(maps.len(), 3);
    for m in &maps {
        assert_eq!(m.values.len(), m.height * m.width);
        assert!(m.values.iter().all(|a| (0.0..=1.0).contains(a)));
    }
    assert_eq!((maps[2].layer, maps[2].height), (11, 4));
    assert_eq!(
        gray_rgba(&[0.0, 1.0, 2.0]),
        vec![0, 0, 0, 255, 255, 255, 255, 255, 255, 255, 255, 255]
    );
}

#[test]
fn sizes_must_fit_the_network() {
    assert!(Session::new(18, 0).is_err());
}
