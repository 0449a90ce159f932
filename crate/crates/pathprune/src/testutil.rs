//! Small helpers shared by unit tests across modules.

use crate::grid::{parse_scene, GridMap};

/// Builds a map from glyph rows (`.` `#` `S` `G` `B`) with the given
/// connectivity, going through the scene parser so tests stay at one level of
/// abstraction.
pub(crate) fn scene(connectivity: u8, rows: &[&str]) -> GridMap {
    let mut text = format!(
        "SCENE v1 {} {} {}\n",
        rows.len(),
        rows[0].len(),
        connectivity
    );
    for row in rows {
        text.push_str(row);
        text.push('\n');
    }
    let (map, _) = parse_scene(&text).expect("test scene must parse");
    map
}
