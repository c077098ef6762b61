mod support;

use goalscope_core::efcc::QuestionType;
use goalscope_core::fixtures;

#[test]
fn answers_match_transcribed_formulas_on_every_step() {
    support::transcription::check_all_steps();
}

#[test]
fn how_to_cook_dinner_while_the_match_is_on() {
    let mut p = fixtures::running_example();
    let id = p.create_step(&["M", "S"], &[], None).unwrap().id.clone();
    p.run_step(&id).unwrap();
    let b = p.ask(&id, QuestionType::SHow, &["C"]).unwrap();
    assert_eq!(p.ids_of(b.answer.family[0]), vec!["M"]);
    assert_eq!(b.answer.family.len(), 1);
    let name = |i: usize| p.short_name(i);
    assert_eq!(
        b.sample_answer(&name),
        "You have to forego one of the goal sets: {sports match}."
    );
}
