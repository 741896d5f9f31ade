use crate::action::Action;
use crate::canonical::{CanonicalPath, NodeName, ValidationError};

use super::grammar::is_bare_safe;

/// Renders a path with the fixed sentence template. The output always parses
/// back to the same path.
pub fn generate_instruction(path: &CanonicalPath) -> Result<String, ValidationError> {
    path.validate()?;
    let mut out = format!(
        "Depart from {} to {}.",
        render_place(&path.waypoints[0]),
        render_place(&path.waypoints[1])
    );
    for (place, action) in path.waypoints[2..].iter().zip(&path.actions) {
        let turn = match action {
            Action::Forward => "",
            Action::TurnLeft => "turn left and ",
            Action::TurnRight => "turn right and ",
            Action::TurnAround => "turn around and ",
        };
        out.push_str(&format!(" Then, {turn}proceed to {}.", render_place(place)));
    }
    Ok(out)
}

fn render_place(name: &NodeName) -> String {
    let text = name.as_str();
    if is_bare_safe(text) {
        text.to_string()
    } else {
        format!("\"{}\"", text.replace('\\', "\\\\").replace('"', "\\\""))
    }
}
