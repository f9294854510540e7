mod common;

use std::thread;

use common::{key, service};
use steerpath_core::{bucket_for, Catalog, MasteryBand, SliderValue};
use steerpath_service::{Explanation, ExplanationVariant, Phase, ServiceError, SessionId};

fn start(svc: &steerpath_service::PracticeService, variant: ExplanationVariant) -> SessionId {
    svc.start_session("amy".into(), "fractions".into(), variant)
        .unwrap()
        .session
        .session_id
}

#[test]
fn start_session_examples() {
    let svc = service();
    let view = svc
        .start_session("amy".into(), "fractions".into(), ExplanationVariant::WhatIf)
        .unwrap();
    assert_eq!(view.session.phase, Phase::ChoosingDifficulty);
    assert!(view.session.plan.is_none());

    let err = svc
        .start_session("amy".into(), "geometry".into(), ExplanationVariant::WhatIf)
        .unwrap_err();
    assert_eq!(err.code(), "not_found");
    let err = svc
        .start_session("amy".into(), "tiny".into(), ExplanationVariant::WhatIf)
        .unwrap_err();
    assert!(matches!(err, ServiceError::InsufficientBank { available: 2, .. }));
}

#[test]
fn concurrent_starts_make_independent_sessions() {
    let svc = service();
    let handles: Vec<_> = (0..8)
        .map(|_| {
            let svc = svc.clone();
            thread::spawn(move || start(&svc, ExplanationVariant::WhatIf))
        })
        .collect();
    let mut ids: Vec<SessionId> = handles.into_iter().map(|h| h.join().unwrap()).collect();
    ids.sort();
    ids.dedup();
    assert_eq!(ids.len(), 8);

    svc.preview(&ids[0], Some(0.2)).unwrap();
    assert_eq!(svc.get_session(&ids[0]).unwrap().session.slider, SliderValue::from_tenths(2));
    assert_eq!(svc.get_session(&ids[1]).unwrap().session.slider, None);
}

#[test]
fn preview_validates_slider_and_is_idempotent() {
    let svc = service();
    let id = start(&svc, ExplanationVariant::WhatIf);
    let before = svc.store_fingerprint();

    let err = svc.preview(&id, Some(0.35)).unwrap_err();
    assert_eq!(err.code(), "invalid_slider");
    assert_eq!(svc.preview(&id, None).unwrap_err().code(), "invalid_slider");

    let first = svc.preview(&id, Some(0.7)).unwrap();
    let second = svc.preview(&id, Some(0.7)).unwrap();
    assert_eq!(first, second);
    assert_eq!(first.exercises.len(), 3);
    let Explanation::WhatIf { projection } = &first.explanation else {
        panic!("what-if session must project");
    };
    assert!(projection.projected_score > projection.current_score);
    assert_eq!(projection.series_exercise_ids, first.plan.exercise_ids);
    assert_eq!(svc.store_fingerprint(), before);
}

#[test]
fn feedback_variant_shows_a_bucket_sentence_and_no_projection() {
    let svc = service();
    let id = start(&svc, ExplanationVariant::Feedback);
    let preview = svc.preview(&id, Some(0.9)).unwrap();
    let Explanation::Feedback { sentence } = preview.explanation else {
        panic!("expected feedback");
    };
    assert_eq!(sentence.bucket_index, 4);
    assert!(Catalog::builtin().bucket(4).contains(&sentence));

    // Same bucket keeps the sentence; a new bucket draws from that bucket.
    let again = svc.preview(&id, Some(1.0)).unwrap();
    assert!(matches!(again.explanation, Explanation::Feedback { sentence: ref s } if *s == sentence));
    let lower = svc.preview(&id, Some(0.3)).unwrap();
    let Explanation::Feedback { sentence } = lower.explanation else {
        panic!("expected feedback");
    };
    assert_eq!(usize::from(sentence.bucket_index), bucket_for(SliderValue::from_tenths(3).unwrap()));
}

#[test]
fn slider_only_and_announcement_variants() {
    let svc = service();
    let id = start(&svc, ExplanationVariant::SliderOnly);
    assert_eq!(svc.preview(&id, Some(0.4)).unwrap().explanation, Explanation::None);

    let id = start(&svc, ExplanationVariant::None);
    let fixed = svc.preview(&id, None).unwrap();
    assert_eq!(fixed.plan.slider, SliderValue::MID);
    assert_eq!(fixed.explanation, Explanation::None);
    assert_eq!(svc.preview(&id, Some(1.0)).unwrap().plan, fixed.plan);
    assert_eq!(svc.preview(&id, Some(0.33)).unwrap_err().code(), "invalid_slider");
}

#[test]
fn commit_transitions() {
    let svc = service();
    let id = start(&svc, ExplanationVariant::WhatIf);
    assert_eq!(svc.commit_series(&id).unwrap_err().code(), "wrong_phase");

    let preview = svc.preview(&id, Some(0.5)).unwrap();
    let view = svc.commit_series(&id).unwrap();
    assert_eq!(view.session.phase, Phase::Practising);
    assert_eq!(view.session.plan.as_ref().unwrap().exercise_ids, preview.plan.exercise_ids);
    assert_eq!(view.exercises.len(), 3);
    assert!(view.exercises.iter().all(|e| e.prompt.starts_with("fraction question")));

    assert_eq!(svc.commit_series(&id).unwrap_err().code(), "wrong_phase");
    assert_eq!(svc.preview(&id, Some(0.5)).unwrap_err().code(), "wrong_phase");
    assert_eq!(svc.commit_series(&SessionId("nope".into())).unwrap_err().code(), "not_found");
}

#[test]
fn answering_a_series() {
    let svc = service();
    let id = start(&svc, ExplanationVariant::WhatIf);
    // Target at rating 0, slider 1.0 is 0.15: picks f3 (0.0), f4 (0.5), f2 (-0.5).
    svc.preview(&id, Some(1.0)).unwrap();
    let plan = svc.commit_series(&id).unwrap().session.plan.unwrap();
    assert_eq!(plan.exercise_ids.map(|e| e.to_string()), ["f2", "f3", "f4"]);

    let outcome = svc.submit_answer(&id, &"f3".into(), "  K3 ").unwrap();
    assert!(outcome.correct);
    assert_eq!(outcome.rating.value(), 0.2);
    assert!((outcome.score.value() - 0.549_834).abs() < 1e-6);
    assert_eq!(outcome.band, MasteryBand::Competent);
    assert_eq!(outcome.phase, Phase::Practising);

    let before = svc.store_fingerprint();
    assert_eq!(svc.submit_answer(&id, &"f3".into(), "k3").unwrap_err().code(), "conflict");
    assert_eq!(svc.submit_answer(&id, &"f0".into(), "k0").unwrap_err().code(), "validation");
    assert_eq!(svc.store_fingerprint(), before);

    let wrong = svc.submit_answer(&id, &"f2".into(), "nope").unwrap();
    assert!(!wrong.correct);
    assert!(wrong.rating.value() < 0.2);
    let last = svc.submit_answer(&id, &"f4".into(), &key("f4")).unwrap();
    assert_eq!(last.phase, Phase::Completed);
    assert_eq!(svc.submit_answer(&id, &"f4".into(), "k4").unwrap_err().code(), "wrong_phase");

    let mastery = svc.mastery(&"amy".into(), &"fractions".into()).unwrap();
    assert_eq!(mastery.rating, last.rating);
    assert_eq!(mastery.attempt_count, 3);
    assert!(svc.audit().is_clean());

    // The cycle restarts with a new session.
    let again = start(&svc, ExplanationVariant::WhatIf);
    assert_ne!(again, id);
    svc.preview(&again, Some(0.5)).unwrap();
}

#[test]
fn teacher_view() {
    let svc = service();
    assert_eq!(
        svc.teacher_why("mr-t", &"amy".into(), &"fractions".into()).unwrap_err().code(),
        "not_found"
    );
    let id = start(&svc, ExplanationVariant::WhatIf);
    let why = svc.teacher_why("mr-t", &"amy".into(), &"fractions".into()).unwrap();
    assert_eq!(why.recommended_count(), 0);
    assert_eq!(why.items.len(), 6);

    svc.preview(&id, Some(0.5)).unwrap();
    let plan = svc.commit_series(&id).unwrap().session.plan.unwrap();
    svc.submit_answer(&id, &plan.exercise_ids[0], "wrong").unwrap();
    let why = svc.teacher_why("mr-t", &"amy".into(), &"fractions".into()).unwrap();
    assert_eq!(why.recommended_count(), 3);
    let d: Vec<f64> = why.items.iter().map(|i| i.difficulty.value()).collect();
    assert!(d.windows(2).all(|w| w[0] <= w[1]), "{d:?}");
    let answered = why.items.iter().find(|i| i.exercise_id == plan.exercise_ids[0]).unwrap();
    assert_eq!((answered.attempt_count, answered.last_correct), (1, Some(false)));

    assert_eq!(svc.teacher_why("", &"amy".into(), &"fractions".into()).unwrap_err().code(), "validation");
    assert_eq!(svc.teacher_why("mr-t", &"amy".into(), &"algebra".into()).unwrap_err().code(), "not_found");
}

#[test]
fn mastery_for_unknown_topic() {
    let svc = service();
    assert_eq!(svc.mastery(&"amy".into(), &"nope".into()).unwrap_err().code(), "not_found");
    let fresh = svc.mastery(&"amy".into(), &"fractions".into()).unwrap();
    assert_eq!((fresh.rating.value(), fresh.attempt_count), (0.0, 0));
    assert_eq!(fresh.band, MasteryBand::Competent);
}
