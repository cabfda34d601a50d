//! Closed tag set for parameter-name sequence labeling.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Tag {
    O,
    SrcChain,
    DstChain,
    SrcAddr,
    DstAddr,
    Amount,
}

impl Tag {
    pub const ALL: [Tag; 6] = [
        Tag::O,
        Tag::SrcChain,
        Tag::DstChain,
        Tag::SrcAddr,
        Tag::DstAddr,
        Tag::Amount,
    ];

    pub const COUNT: usize = 6;

    pub fn index(self) -> usize {
        match self {
            Tag::O => 0,
            Tag::SrcChain => 1,
            Tag::DstChain => 2,
            Tag::SrcAddr => 3,
            Tag::DstAddr => 4,
            Tag::Amount => 5,
        }
    }

    pub fn from_index(i: usize) -> Option<Tag> {
        Tag::ALL.get(i).copied()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Tag::O => "O",
            Tag::SrcChain => "SRC_CHAIN",
            Tag::DstChain => "DST_CHAIN",
            Tag::SrcAddr => "SRC_ADDR",
            Tag::DstAddr => "DST_ADDR",
            Tag::Amount => "AMOUNT",
        }
    }

    pub fn parse(s: &str) -> Option<Tag> {
        Tag::ALL.iter().copied().find(|t| t.as_str() == s)
    }
}

/// Non-O roles a labeled parameter can carry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Role {
    SrcChain,
    DstChain,
    SrcAddr,
    DstAddr,
    Amount,
}

impl Role {
    pub fn tag(self) -> Tag {
        match self {
            Role::SrcChain => Tag::SrcChain,
            Role::DstChain => Tag::DstChain,
            Role::SrcAddr => Tag::SrcAddr,
            Role::DstAddr => Tag::DstAddr,
            Role::Amount => Tag::Amount,
        }
    }

    pub fn from_tag(tag: Tag) -> Option<Role> {
        match tag {
            Tag::O => None,
            Tag::SrcChain => Some(Role::SrcChain),
            Tag::DstChain => Some(Role::DstChain),
            Tag::SrcAddr => Some(Role::SrcAddr),
            Tag::DstAddr => Some(Role::DstAddr),
            Tag::Amount => Some(Role::Amount),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tag_string_round_trip() {
        for tag in Tag::ALL {
            assert_eq!(Tag::parse(tag.as_str()), Some(tag));
            assert_eq!(Tag::from_index(tag.index()), Some(tag));
        }
        assert_eq!(Tag::parse("BOGUS"), None);
    }
}
