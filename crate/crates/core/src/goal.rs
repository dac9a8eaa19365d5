//! Extraction of the episode goal `g_0` from the first observation.

use alloc::string::{String, ToString};

use crate::context::Observation;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum GoalError {
    #[error("the first observation has no task marker line")]
    MissingTaskMarker,
}

fn clean(s: &str) -> String {
    s.trim().trim_end_matches('.').trim_end().to_string()
}

/// Returns the task sentence with its marker and trailing period removed.
///
/// Recognized markers: `Your task is to:` (household), `Goal:` (textcraft)
/// and an `Instruction:` block (webshop, where the sentence may sit on the
/// following line).
pub fn extract_goal(initial: &Observation) -> Result<String, GoalError> {
    let lines: alloc::vec::Vec<&str> = initial.text.lines().collect();
    for marker in ["Your task is to:", "Goal:"] {
        if let Some(rest) = lines.iter().rev().find_map(|l| l.trim_start().strip_prefix(marker)) {
            let goal = clean(rest);
            if !goal.is_empty() {
                return Ok(goal);
            }
        }
    }
    if let Some(i) = lines.iter().position(|l| l.trim_start().starts_with("Instruction:")) {
        let inline = clean(lines[i].trim_start().trim_start_matches("Instruction:"));
        if !inline.is_empty() {
            return Ok(inline);
        }
        if let Some(next) = lines[i + 1..].iter().map(|l| clean(l)).find(|l| !l.is_empty()) {
            return Ok(next);
        }
    }
    Err(GoalError::MissingTaskMarker)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn household_marker() {
        let o = Observation::initial("You are in the middle of a room.\nYour task is to: put a hot apple in fridge.");
        assert_eq!(extract_goal(&o).unwrap(), "put a hot apple in fridge");
        assert_eq!(extract_goal(&Observation::initial("Your task is to: x.")).unwrap(), "x");
    }

    #[test]
    fn webshop_and_textcraft_markers() {
        let o = Observation::initial("Webshop \nInstruction:  \ni would like a lamp \n[Search]  ");
        assert_eq!(extract_goal(&o).unwrap(), "i would like a lamp");
        let o = Observation::initial("Crafting commands:\ncraft 1 plank using 1 log\nGoal: craft 1 plank.");
        assert_eq!(extract_goal(&o).unwrap(), "craft 1 plank");
    }

    #[test]
    fn missing_marker() {
        assert_eq!(extract_goal(&Observation::initial("nothing here")), Err(GoalError::MissingTaskMarker));
    }
}
