use super::{Achievement, Cell, EnvEvent, EventKind, WorldState};

/// Caption of the transition into the first observation of an episode.
pub const EMPTY_TRANSITION: &str = "noop";

/// Every string [`caption_transition`] can produce, in vocabulary order.
pub fn transition_captions() -> Vec<String> {
    let mut v: Vec<String> = Achievement::ALL.iter().map(|a| a.caption().to_string()).collect();
    v.push("move".into());
    v.push("noop".into());
    v
}

pub fn caption_transition(event: &EnvEvent) -> &'static str {
    match (event.kind, event.object) {
        (EventKind::Collected, Some("wood")) => Achievement::CollectWood.caption(),
        (EventKind::Collected, Some("stone")) => Achievement::CollectStone.caption(),
        (EventKind::Placed, Some("table")) => Achievement::PlaceTable.caption(),
        (EventKind::Crafted, Some("wood pickaxe")) => Achievement::MakeWoodPickaxe.caption(),
        (EventKind::Crafted, Some("stone pickaxe")) => Achievement::MakeStonePickaxe.caption(),
        (EventKind::Moved, _) => "move",
        _ => "noop",
    }
}

/// `The player sees [objects], The player has [objects], The status of the
/// player is [text]`. Visible objects are listed once each regardless of
/// how many are in view.
pub fn caption_observation(state: &WorldState) -> String {
    let window = state.window();
    let seen: Vec<&str> = [Cell::Tree, Cell::Stone, Cell::Table]
        .into_iter()
        .filter(|c| window.contains(&Some(*c)))
        .map(Cell::name)
        .collect();
    let sees = if seen.is_empty() {
        "nothing".to_string()
    } else {
        seen.join(", ")
    };
    let inv = state.inventory;
    let items: Vec<String> = [
        (inv.wood, "wood"),
        (inv.stone, "stone"),
        (inv.wood_pickaxe, "wood pickaxe"),
        (inv.stone_pickaxe, "stone pickaxe"),
    ]
    .into_iter()
    .filter(|(n, _)| *n > 0)
    .map(|(n, name)| format!("{n} {name}"))
    .collect();
    let has = if items.is_empty() {
        "nothing".to_string()
    } else {
        items.join(", ")
    };
    format!("The player sees {sees}, The player has {has}, The status of the player is healthy")
}
