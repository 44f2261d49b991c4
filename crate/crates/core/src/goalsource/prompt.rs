use crate::error::{Error, Result};

/// How the provider is asked for goals.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum PromptMode {
    /// `K` goals of any kind.
    FreeForm,
    /// One goal per named type, e.g. `["where to go", "what to do"]`.
    Typed(Vec<String>),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PromptTemplate {
    pub system_text: String,
    /// Game information with `[objects/creatures]`, `[objects]`, `[text]`
    /// (alias `[status]`) and `[observation]` slots.
    pub game_info_format: String,
    pub mode: PromptMode,
}

/// Fields extracted from an observation caption.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ObservationFields {
    pub sees: String,
    pub has: String,
    pub status: String,
}

const SEES: &str = "The player sees ";
const HAS: &str = ", The player has ";
const STATUS: &str = ", The status of the player is ";

/// Accepts the captioner's `The player sees A, The player has B, The status
/// of the player is C` form and a compact `sees A; has B; status C` form.
/// Anything else lands whole in `sees`.
pub fn parse_observation_caption(caption: &str) -> ObservationFields {
    let caption = caption.trim();
    if let Some(rest) = caption.strip_prefix(SEES) {
        if let Some((sees, rest)) = rest.split_once(HAS) {
            if let Some((has, status)) = rest.split_once(STATUS) {
                return ObservationFields {
                    sees: sees.to_string(),
                    has: has.to_string(),
                    status: status.trim_end_matches('.').to_string(),
                };
            }
        }
    }
    let mut fields = ObservationFields {
        sees: String::new(),
        has: String::new(),
        status: String::new(),
    };
    let mut matched = false;
    for part in caption.split(';').map(str::trim) {
        if let Some(v) = part.strip_prefix("sees ") {
            fields.sees = v.to_string();
            matched = true;
        } else if let Some(v) = part.strip_prefix("has ") {
            fields.has = v.to_string();
            matched = true;
        } else if let Some(v) = part.strip_prefix("status ") {
            fields.status = v.to_string();
            matched = true;
        }
    }
    if !matched {
        fields.sees = caption.to_string();
    }
    for f in [&mut fields.sees, &mut fields.has, &mut fields.status] {
        if f.is_empty() {
            *f = "unknown".to_string();
        }
    }
    fields
}

impl PromptTemplate {
    /// Free-form template for the achievement gridworld.
    pub fn gridworld(k: usize) -> Self {
        Self {
            system_text: format!(
                "You are advising a player in a small survival crafting game. \
                 You will be told what the player sees, what the player carries and \
                 the player's status. List the {k} most useful goals the player should \
                 pursue over the next few steps to progress through the game. \
                 Answer only with goals separated by ','. Do not add numbering or \
                 any other words.\n\nExample answer:\n\
                 collect wood, place table, craft wood pickaxe, collect stone, craft stone pickaxe."
            ),
            game_info_format: "The player sees [objects/creatures],\nThe player has [objects],\n\
                               The status of the player is [text]."
                .to_string(),
            mode: PromptMode::FreeForm,
        }
    }

    pub fn render_game_info(&self, obs_caption: &str) -> String {
        let f = parse_observation_caption(obs_caption);
        let mut s = self
            .game_info_format
            .replace("[objects/creatures]", &f.sees)
            .replace("[objects]", &f.has)
            .replace("[text]", &f.status)
            .replace("[status]", &f.status)
            .replace("[observation]", obs_caption);
        if let PromptMode::Typed(types) = &self.mode {
            s.push_str("\nGive exactly one goal for each of: ");
            s.push_str(&types.join(", "));
            s.push('.');
        }
        s
    }
}

/// System text followed by the rendered game information.
pub fn render_prompt(template: &PromptTemplate, obs_caption: &str) -> String {
    let info = template.render_game_info(obs_caption);
    if template.system_text.is_empty() {
        info
    } else {
        format!("{}\n\n{}", template.system_text, info)
    }
}

/// Comma-separated goals, trimmed, empties dropped, at most `k`.
/// A trailing full stop on an item is removed.
pub fn parse_goals(completion: &str, k: usize) -> Result<Vec<String>> {
    let goals: Vec<String> = completion
        .split(',')
        .map(|g| g.trim().trim_end_matches('.').trim())
        .filter(|g| !g.is_empty())
        .take(k)
        .map(str::to_string)
        .collect();
    if goals.is_empty() {
        return Err(Error::EmptyCompletion);
    }
    Ok(goals)
}
