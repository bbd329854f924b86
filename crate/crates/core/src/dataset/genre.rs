use std::fmt;

use serde::{Deserialize, Serialize};

/// The five genre groups games are clustered into.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum GenreClass {
    RolePlaying,
    Strategy,
    Action,
    Sports,
    Miscellaneous,
}

impl GenreClass {
    pub const ALL: [GenreClass; 5] = [
        GenreClass::RolePlaying,
        GenreClass::Strategy,
        GenreClass::Action,
        GenreClass::Sports,
        GenreClass::Miscellaneous,
    ];

    /// Storefront genres belonging to this group.
    pub fn members(self) -> &'static [&'static str] {
        match self {
            GenreClass::RolePlaying => &["Adventure", "First-Person", "Third-Person", "Role-Playing"],
            GenreClass::Strategy => &["Turn-Based", "Strategy", "War-Game", "Puzzle", "Platformer"],
            GenreClass::Action => &["Action"],
            GenreClass::Sports => &["Fighting", "Sports", "Racing", "Wrestling"],
            GenreClass::Miscellaneous => &["Simulation", "Flight", "Party", "Real-Time"],
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            GenreClass::RolePlaying => "Role-Playing",
            GenreClass::Strategy => "Strategy",
            GenreClass::Action => "Action",
            GenreClass::Sports => "Sports",
            GenreClass::Miscellaneous => "Miscellaneous",
        }
    }
}

impl fmt::Display for GenreClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Case-insensitive exact lookup; genres outside the table are `Miscellaneous`.
pub fn map_genre(genre_raw: &str) -> GenreClass {
    let g = genre_raw.trim();
    GenreClass::ALL
        .into_iter()
        .find(|class| class.members().iter().any(|m| m.eq_ignore_ascii_case(g)))
        .unwrap_or(GenreClass::Miscellaneous)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_rows() {
        assert_eq!(map_genre("Wrestling"), GenreClass::Sports);
        assert_eq!(map_genre("Action"), GenreClass::Action);
        assert_eq!(map_genre("Underwater-Basket-Weaving"), GenreClass::Miscellaneous);
        assert_eq!(map_genre("role-playing"), GenreClass::RolePlaying);
        assert_eq!(map_genre("  PUZZLE "), GenreClass::Strategy);
        assert_eq!(map_genre("Real-Time"), GenreClass::Miscellaneous);
        assert_eq!(map_genre(""), GenreClass::Miscellaneous);
    }

    #[test]
    fn every_member_maps_to_its_own_class() {
        for class in GenreClass::ALL {
            for m in class.members() {
                assert_eq!(map_genre(m), class, "{m}");
            }
        }
    }
}
