//! The four-route protocol driven by scripted translator outputs.

use goalscope_agents::prompts::Role;
use goalscope_agents::template::{self, ENFORCE_MORE};
use goalscope_agents::{Conversation, Dispatcher, GoalOutcome, MockProvider, Route, RoutingDecision, Turn, UserInput};
use goalscope_core::efcc::QuestionType;
use goalscope_core::fixtures;
use goalscope_core::ltlf::GoalSource;
use goalscope_core::session::Project;
use proptest::prelude::*;
use serde_json::json;
use std::sync::Arc;

fn qt(qtype: &str, args: &[&str], used: &str, reverse: &str, direct: Option<&str>) -> String {
    let args: Vec<&str> = if args.is_empty() { vec![""] } else { args.to_vec() };
    json!({
        "questionType": qtype,
        "questionArgument": args,
        "used": used,
        "reverseTranslation": reverse,
        "directResponse": direct,
    })
    .to_string()
}

fn et(text: &str) -> String {
    json!({ "output": text }).to_string()
}

fn text(t: &str) -> UserInput {
    UserInput::Text { text: t.to_string() }
}

struct Session {
    project: Project,
    conv: Conversation,
    mock: Arc<MockProvider>,
    dispatcher: Dispatcher,
}

impl Session {
    fn new(project: Project) -> Self {
        let mock = Arc::new(MockProvider::new());
        let dispatcher = Dispatcher::llm(mock.clone());
        Session {
            project,
            conv: Conversation::default(),
            mock,
            dispatcher,
        }
    }

    fn step(&mut self, enf: &[&str]) -> String {
        let enf: Vec<String> = enf.iter().map(|e| e.to_string()).collect();
        let all: Vec<String> = self.project.goals().iter().map(|g| g.id.clone()).collect();
        let id = self.project.create_step(&enf, &all, None).unwrap().id.clone();
        self.project.run_step(&id).unwrap();
        id
    }

    fn ask(&mut self, step: &str, input: UserInput) -> Turn {
        self.dispatcher
            .dispatch(&mut self.project, &mut self.conv, step, input)
            .unwrap()
    }

    fn requests(&self, role: Role) -> Vec<goalscope_agents::ProviderRequest> {
        self.mock.requests().into_iter().filter(|r| r.agent == role).collect()
    }
}

#[test]
fn what_do_i_have_to_do_is_answered_directly() {
    let mut s = Session::new(fixtures::running_example());
    let step = s.step(&["C", "M"]);
    let reply = "You have to find a combination of goals that can be satisfied together.";
    s.mock.push(
        Role::QuestionTranslator,
        qt(
            "DIRECT-USER",
            &[],
            "NO-ARGUMENT-REQUIRED",
            "What do I have to do?",
            Some(reply),
        ),
    );
    let t = s.ask(&step, text("What do I have to do?"));
    assert_eq!(t.decision.route(), Route::Direct);
    assert_eq!(t.answer, reply);
    assert!(t.bundles.is_empty());
    assert!(s.requests(Role::ExplanationTranslator).is_empty());
    let q = &s.requests(Role::QuestionTranslator)[0];
    assert!(q
        .input
        .starts_with("Question: What do I have to do?\n\nEnforced Goals: [cook dinner, sports match]"));
    assert!(q.input.contains("Solvable: False"));
}

#[test]
fn why_unsolvable_queries_the_framework_without_arguments() {
    let mut s = Session::new(fixtures::running_example());
    let step = s.step(&["C", "M"]);
    s.mock.push(
        Role::QuestionTranslator,
        qt(
            "US-WHY",
            &[],
            "NO-ARGUMENT-REQUIRED",
            "Why is the planning task unsolvable?",
            None,
        ),
    );
    s.mock.push(
        Role::ExplanationTranslator,
        et("cook dinner and sports match conflict."),
    );
    let t = s.ask(&step, text("Why is the task unsolvable?"));
    assert_eq!(
        t.decision,
        RoutingDecision::EfqueryNoGt {
            question_type: QuestionType::UsWhy,
            args: vec![],
        }
    );
    assert_eq!(
        t.reverse_translation.as_deref(),
        Some("Why is the planning task unsolvable?")
    );
    assert_eq!(t.answer, "cook dinner and sports match conflict.");
    assert_eq!(t.bundles.len(), 1);
    let e = &s.requests(Role::ExplanationTranslator)[0];
    assert!(e.input.contains("Question Type: US-WHY"), "{}", e.input);
    assert!(
        e.input.contains("Conflicts: [[cook dinner, sports match]]"),
        "{}",
        e.input
    );
    assert!(
        e.input.contains("Resolutions: [[cook dinner], [sports match]]"),
        "{}",
        e.input
    );
}

#[test]
fn follow_up_goes_to_the_explanation_translator_with_its_history() {
    let mut s = Session::new(fixtures::running_example());
    let step = s.step(&["M"]);
    s.mock.push(
        Role::QuestionTranslator,
        qt(
            "S-WHY-NOT",
            &["cook dinner"],
            "ALREADY-USED",
            "Why is the goal **cook dinner** not satisfied?",
            None,
        ),
    );
    s.mock.push(
        Role::ExplanationTranslator,
        et("It conflicts with an enforced goal. Shall I list it?"),
    );
    let t = s.ask(&step, text("Why can't I cook dinner?"));
    assert_eq!(
        t.decision,
        RoutingDecision::EfqueryNoGt {
            question_type: QuestionType::SWhyNot,
            args: vec!["C".into()],
        }
    );

    s.mock.push(
        Role::QuestionTranslator,
        qt(
            "DIRECT-ET",
            &[],
            "NO-ARGUMENT-REQUIRED",
            "",
            Some("yes enumerate the conflicts"),
        ),
    );
    s.mock.push(
        Role::ExplanationTranslator,
        et("cook dinner conflicts with sports match."),
    );
    let t = s.ask(&step, text("yes enumerate the conflicts"));
    assert_eq!(
        t.decision,
        RoutingDecision::FollowUp {
            question: "yes enumerate the conflicts".into()
        }
    );
    assert_eq!(t.answer, "cook dinner conflicts with sports match.");

    let e = s.requests(Role::ExplanationTranslator);
    assert_eq!(e.len(), 2);
    assert_eq!(e[1].input, "yes enumerate the conflicts");
    assert_eq!(e[1].context.len(), 2, "the first exchange is the context");
    assert_eq!(e[1].context[0].content, e[0].input);
    let q = s.requests(Role::QuestionTranslator);
    assert_eq!(q[1].context.len(), 2);
}

#[test]
fn buying_shoes_resolves_to_the_shopping_goal() {
    let mut s = Session::new(fixtures::running_example());
    let step = s.step(&["M"]);
    s.mock.push(
        Role::QuestionTranslator,
        qt(
            "S-CAN",
            &["shopping"],
            "ALREADY-USED",
            "Can the goal **shopping** be satisfied?",
            None,
        ),
    );
    s.mock
        .push(Role::ExplanationTranslator, et("Yes, you have time for shopping."));
    let t = s.ask(&step, text("Do I have the time to buy shoes?"));
    assert_eq!(
        t.decision,
        RoutingDecision::EfqueryNoGt {
            question_type: QuestionType::SCan,
            args: vec!["S".into()],
        }
    );
    assert!(t.registered_goals.is_empty());
    let e = &s.requests(Role::ExplanationTranslator)[0];
    assert!(e.input.contains("Question Arguments: [shopping]"));
}

#[test]
fn enforcing_more_goals_fans_out_per_goal() {
    let mut s = Session::new(fixtures::running_example());
    let step = s.step(&["M"]);
    let unsatisfied = s.project.step(&step).unwrap().g_false.clone();
    let names: Vec<String> = unsatisfied
        .iter()
        .map(|id| s.project.goal(id).unwrap().short_name.clone())
        .collect();
    let args: Vec<&str> = names.iter().map(String::as_str).collect();
    s.mock
        .push(Role::QuestionTranslator, qt("S-CAN", &args, "ALREADY-USED", "", None));
    s.mock
        .push(Role::ExplanationTranslator, et("Shopping fits, cooking does not."));
    let t = s.ask(&step, text(ENFORCE_MORE));
    assert_eq!(t.decision.route(), Route::EfqueryNoGt);
    assert_eq!(t.bundles.len(), unsatisfied.len());
    assert!(unsatisfied.contains(&"C".to_string()));
    let e = &s.requests(Role::ExplanationTranslator)[0];
    assert!(
        e.input.contains("Conflicts: [[cook dinner, sports match]]"),
        "{}",
        e.input
    );
}

#[test]
fn new_goal_descriptions_are_translated_and_registered() {
    let mut s = Session::new(fixtures::transport());
    assert!(s.project.goal_translator);
    let step = s.step(&["p1-market"]);
    let description = "p1 visits the packingstation at some point";
    s.mock.push(
        Role::QuestionTranslator,
        qt("S-CAN", &[description], "NEW", "Can p1 visit the packingstation?", None),
    );
    s.mock.push(
        Role::GoalTranslator,
        json!({
            "formula": "F at(p1,packingstation)",
            "shortName": "p1 visits packingstation",
            "reverseTranslation": "p1 must be at the packingstation at some point during the plan",
            "feedback": null,
        })
        .to_string(),
    );
    s.mock
        .push(Role::ExplanationTranslator, et("Yes, p1 can visit the packingstation."));
    let t = s.ask(&step, text("make sure p1 visits the packingstation at some point"));
    assert_eq!(
        t.decision,
        RoutingDecision::EfqueryGt {
            question_type: QuestionType::SCan,
            known: vec![],
            descriptions: vec![description.into()],
        }
    );
    assert_eq!(t.registered_goals, ["p1-visits-packingstation"]);
    assert!(!t.degraded);
    let g = s.project.goal("p1-visits-packingstation").unwrap();
    assert_eq!(g.source, GoalSource::Translated);
    assert_eq!(g.utility, 0);
    assert_eq!(t.bundles.len(), 1);

    let gt = &s.requests(Role::GoalTranslator)[0];
    assert!(gt.input.starts_with(&format!("Goal: {description}\n\nPredicates: [")));
    assert!(
        gt.input
            .contains("Objects: [t1, p1, p2, depot, packingstation, market, harbor]"),
        "{}",
        gt.input
    );
    let e = &s.requests(Role::ExplanationTranslator)[0];
    assert!(
        e.input.contains("Question Arguments: [p1 visits packingstation]"),
        "{}",
        e.input
    );

    // The registered goal is a known goal from now on.
    s.mock.push(
        Role::QuestionTranslator,
        qt("S-HOW", &["p1 visits packingstation"], "ALREADY-USED", "", None),
    );
    s.mock.push(Role::ExplanationTranslator, et("Unload p1 on the way."));
    let t = s.ask(&step, text("How can p1 visit the packingstation?"));
    assert_eq!(
        t.decision,
        RoutingDecision::EfqueryNoGt {
            question_type: QuestionType::SHow,
            args: vec!["p1-visits-packingstation".into()],
        }
    );
}

#[test]
fn unsupported_and_unparsable_goals_yield_no_query() {
    for formula in ["UNSUPPORTED ; Unsupported property", "F at(p9,nowhere)"] {
        let mut s = Session::new(fixtures::transport());
        let step = s.step(&["p1-market"]);
        let before = s.project.goals().len();
        s.mock
            .push(Role::QuestionTranslator, qt("S-CAN", &["p1 is fast"], "NEW", "", None));
        s.mock.push(
            Role::GoalTranslator,
            json!({"formula": formula, "shortName": "x", "reverseTranslation": null, "feedback": null}).to_string(),
        );
        let t = s.ask(&step, text("Can p1 be fast?"));
        assert_eq!(t.decision.route(), Route::EfqueryGt);
        assert!(
            t.answer.starts_with("I could not express \"p1 is fast\""),
            "{}",
            t.answer
        );
        assert!(t.bundles.is_empty());
        assert!(t.registered_goals.is_empty());
        assert_eq!(s.project.goals().len(), before);
        assert!(s.requests(Role::ExplanationTranslator).is_empty());
    }
}

#[test]
fn goal_translation_is_off_in_demo_projects() {
    let mut s = Session::new(fixtures::running_example());
    let step = s.step(&["M"]);
    s.mock
        .push(Role::QuestionTranslator, qt("S-CAN", &["go swimming"], "NEW", "", None));
    let t = s.ask(&step, text("Can I go swimming?"));
    assert_eq!(t.decision.route(), Route::EfqueryGt);
    assert!(t
        .answer
        .starts_with("I can only answer questions about the goals of this task"));
    assert!(t.answer.ends_with("I could not match: go swimming."));
    assert!(s.requests(Role::GoalTranslator).is_empty());
}

#[test]
fn malformed_output_is_retried_once_then_apologized_for() {
    let mut s = Session::new(fixtures::running_example());
    let step = s.step(&["C", "M"]);
    s.mock.push(Role::QuestionTranslator, "not json");
    s.mock.push(
        Role::QuestionTranslator,
        qt("S-CAN", &["shopping"], "ALREADY-USED", "", None),
    );
    let t = s.ask(&step, text("Huh?"));
    assert!(t.degraded);
    assert_eq!(t.decision.route(), Route::Direct);
    assert_eq!(t.answer, goalscope_agents::dispatch::APOLOGY);
    assert_eq!(s.requests(Role::QuestionTranslator).len(), 2);
    assert!(s
        .conv
        .context(&step)
        .unwrap()
        .transcript(Role::QuestionTranslator)
        .is_empty());

    s.mock.push(Role::QuestionTranslator, "{}");
    s.mock.push(
        Role::QuestionTranslator,
        qt("US-HOW", &[], "NO-ARGUMENT-REQUIRED", "", None),
    );
    s.mock.push(Role::ExplanationTranslator, et("Drop one of them."));
    let t = s.ask(&step, text("How do I fix this?"));
    assert!(!t.degraded);
    assert_eq!(t.answer, "Drop one of them.");
}

#[test]
fn explanation_failure_on_a_menu_question_falls_back_to_the_template() {
    let mut s = Session::new(fixtures::running_example());
    let step = s.step(&["C", "M"]);
    let t = s.ask(
        &step,
        UserInput::Menu {
            question_type: QuestionType::UsHow,
            args: vec![],
        },
    );
    assert!(t.degraded);
    assert_eq!(
        t.answer,
        "To make the task solvable you have to forego one of the goal sets: {cook dinner}, {sports match}."
    );
}

#[test]
fn contexts_never_span_steps() {
    let mut s = Session::new(fixtures::running_example());
    let a = s.step(&["C", "M"]);
    let b = s.step(&["M"]);
    for step in [&a, &b, &a] {
        s.mock.push(
            Role::QuestionTranslator,
            qt("DIRECT-USER", &[], "NO-ARGUMENT-REQUIRED", "", Some("ok")),
        );
        s.ask(step, text("hello"));
    }
    let q = s.requests(Role::QuestionTranslator);
    assert_eq!(q.iter().map(|r| r.step_id.as_str()).collect::<Vec<_>>(), [&a, &b, &a]);
    assert_eq!(q[0].context.len(), 0);
    assert_eq!(q[1].context.len(), 0, "a new step starts with an empty context");
    assert_eq!(q[2].context.len(), 2);
    assert!(q[2].input.contains("Solvable: False"));
    assert_eq!(s.conv.turns_for(&a).count(), 2);
}

#[test]
fn suggester_output_is_used_and_falls_back_to_the_template() {
    let mut s = Session::new(fixtures::running_example());
    let step = s.step(&["M"]);
    s.mock.push(Role::QuestionSuggester, r#"["Can I also go shopping?"]"#);
    let got = s.dispatcher.suggest(&s.project, &mut s.conv, &step).unwrap();
    assert_eq!(got, ["Can I also go shopping?"]);
    let r = &s.requests(Role::QuestionSuggester)[0];
    assert!(r.input.contains("- Solvable: true"));
    assert!(r.input.contains("  (none)"));

    s.mock.push(Role::QuestionSuggester, "[]");
    s.mock.push(Role::QuestionSuggester, "[]");
    let got = s.dispatcher.suggest(&s.project, &mut s.conv, &step).unwrap();
    let expected = template::suggestions(&s.project, s.project.step(&step).unwrap()).unwrap();
    assert_eq!(got, expected);
}

#[test]
fn template_backend_is_deterministic() {
    let run = || {
        let mut p = fixtures::running_example();
        let id = p.create_step(&["M"], &[], None).unwrap().id.clone();
        p.run_step(&id).unwrap();
        let d = Dispatcher::template();
        let mut c = Conversation::default();
        let mut answers = Vec::new();
        for q in QuestionType::SOLVABLE {
            let t = d
                .dispatch(
                    &mut p,
                    &mut c,
                    &id,
                    UserInput::Menu {
                        question_type: q,
                        args: vec!["C".into()],
                    },
                )
                .unwrap();
            answers.push(serde_json::to_string(&t).unwrap());
        }
        answers.push(d.dispatch(&mut p, &mut c, &id, text("anything")).unwrap().answer);
        answers
    };
    let first = run();
    assert_eq!(first, run());
    assert!(first.last().unwrap().contains("Why is cook dinner not satisfied?"));
}

fn running_names() -> Vec<String> {
    let p = fixtures::running_example();
    p.goals()
        .iter()
        .flat_map(|g| [g.id.clone(), g.short_name.clone(), g.short_name.to_uppercase()])
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// Query arguments are registered ids; goal-translator descriptions
    /// never name a registered goal.
    #[test]
    fn routes_are_sound(
        picks in proptest::collection::vec(
            prop_oneof![
                proptest::sample::select(running_names()),
                "[a-z]{3,8}( [a-z]{3,8})?",
            ],
            1..4,
        ),
        qtype in proptest::sample::select(QuestionType::SOLVABLE.to_vec()),
    ) {
        let mut s = Session::new(fixtures::running_example());
        let step = s.step(&["M"]);
        let args: Vec<&str> = picks.iter().map(String::as_str).collect();
        s.mock.push(Role::QuestionTranslator, qt(qtype.label(), &args, "NEW", "", None));
        s.mock.push(Role::ExplanationTranslator, et("ok"));
        let t = s.ask(&step, text("q"));
        match t.decision {
            RoutingDecision::EfqueryNoGt { question_type, args } => {
                prop_assert_eq!(question_type, qtype);
                for a in &args {
                    prop_assert!(s.project.goal(a).is_some());
                }
            }
            RoutingDecision::EfqueryGt { question_type, known, descriptions } => {
                prop_assert_eq!(question_type, qtype);
                prop_assert!(!descriptions.is_empty());
                for a in &known {
                    prop_assert!(s.project.goal(a).is_some());
                }
                for d in &descriptions {
                    prop_assert!(s.project.resolve_goal_name(d).is_none());
                }
            }
            other => prop_assert!(false, "unexpected {:?}", other),
        }
    }
}

#[test]
fn goals_can_be_created_from_descriptions() {
    let mut s = Session::new(fixtures::transport());
    s.mock.push(
        Role::GoalTranslator,
        json!({
            "formula": "G !at(p1,harbor)",
            "shortName": "p1 avoids harbor",
            "reverseTranslation": "p1 is never at the harbor",
            "feedback": null,
        })
        .to_string(),
    );
    let out = s
        .dispatcher
        .add_goal_from_text(&mut s.project, &mut s.conv, "keep p1 away from the harbor", 3)
        .unwrap();
    match out {
        GoalOutcome::Registered {
            goal,
            reverse_translation,
        } => {
            assert_eq!(goal.id, "p1-avoids-harbor");
            assert_eq!(goal.utility, 3);
            assert_eq!(reverse_translation.as_deref(), Some("p1 is never at the harbor"));
        }
        other => panic!("{other:?}"),
    }
    let ctx = s.conv.context(goalscope_agents::dispatch::GOAL_CONTEXT).unwrap();
    assert_eq!(ctx.transcript(Role::GoalTranslator).len(), 2);

    let mut demo = fixtures::running_example();
    let err = s
        .dispatcher
        .add_goal_from_text(&mut demo, &mut Conversation::default(), "anything", 1)
        .unwrap_err();
    assert!(matches!(err, goalscope_agents::AgentError::Unavailable(_)));
}
