//! Template-stack transcript of a demo session: every menu question on a
//! fixed set of steps, rendered as plain text for golden-file comparison.

use crate::report::step_table;
use crate::task::{CliError, TaskSource};
use goalscope_agents::template::question_menu;
use goalscope_agents::{Conversation, Dispatcher, UserInput};
use goalscope_core::session::{Mode, Project};

/// Steps of the introduction transcript, as enforced goal ids.
pub const INTRODUCTION_STEPS: [&[&str]; 4] = [
    &[
        "do-groceries",
        "clean-home",
        "cook-lunch",
        "cook-dinner",
        "bob-tennis",
        "bob-homework",
        "alice-violin",
        "alice-homework",
    ],
    &["alice-violin", "alice-homework"],
    &["cook-lunch", "cook-dinner", "bob-homework", "alice-homework"],
    &[
        "do-groceries",
        "cook-lunch",
        "cook-dinner",
        "bob-tennis",
        "bob-homework",
        "alice-homework",
    ],
];

pub fn template_transcript(fixture: &str, steps: &[&[&str]]) -> Result<String, CliError> {
    let mut project: Project = TaskSource::fixture(fixture).load(Mode::Demo)?;
    let demo = project.precompute_demo()?;
    let max_utility = demo.max_utility;
    project.set_demo(demo);
    let dispatcher = Dispatcher::template();
    let mut conv = Conversation::default();
    let mut out = vec![format!("# {fixture}: maximum utility {max_utility}")];
    for enforce in steps {
        let id = project.create_step(enforce, &[] as &[&str], None)?.id.clone();
        project.run_step(&id)?;
        let step = project.step(&id).expect("just created").clone();
        out.push(String::new());
        out.push(format!("## {id}"));
        out.push(step_table(&step));
        let menu = question_menu(&project, &step)?;
        for entry in menu {
            let turn = dispatcher
                .dispatch(
                    &mut project,
                    &mut conv,
                    &id,
                    UserInput::Menu {
                        question_type: entry.question_type,
                        args: entry.args.clone(),
                    },
                )
                .map_err(|e| match e {
                    goalscope_agents::AgentError::Session(s) => CliError::Session(s),
                    other => CliError::Usage(other.to_string()),
                })?;
            out.push(String::new());
            out.push(format!("Q: {}", entry.label));
            out.extend(turn.answer.lines().map(|l| format!("A: {l}")));
        }
    }
    out.push(String::new());
    Ok(out.join("\n"))
}
