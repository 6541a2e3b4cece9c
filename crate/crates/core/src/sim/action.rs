use std::fmt;

/// Longitudinal maneuver; each maps to one discrete acceleration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Longitudinal {
    Maintain,
    Accelerate,
    Brake,
    HardBrake,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Lateral {
    Keep,
    ChangeLeft,
    ChangeRight,
}

impl Longitudinal {
    pub const ALL: [Longitudinal; 4] = [
        Longitudinal::Maintain,
        Longitudinal::Accelerate,
        Longitudinal::Brake,
        Longitudinal::HardBrake,
    ];

    pub fn ordinal(self) -> usize {
        self as usize
    }

    /// Commanded acceleration given the nominal (`accel`) and emergency (`hard_brake`) magnitudes.
    pub fn acceleration(self, accel: f64, hard_brake: f64) -> f64 {
        match self {
            Longitudinal::Maintain => 0.0,
            Longitudinal::Accelerate => accel,
            Longitudinal::Brake => -accel,
            Longitudinal::HardBrake => -hard_brake,
        }
    }

    /// Rank by commanded acceleration, most aggressive first.
    pub fn aggressiveness(self) -> u8 {
        match self {
            Longitudinal::Accelerate => 3,
            Longitudinal::Maintain => 2,
            Longitudinal::Brake => 1,
            Longitudinal::HardBrake => 0,
        }
    }

    /// The less aggressive of the two.
    pub fn min_aggressive(self, other: Longitudinal) -> Longitudinal {
        if other.aggressiveness() < self.aggressiveness() {
            other
        } else {
            self
        }
    }

    /// One notch gentler; `HardBrake` is the floor.
    pub fn softer(self) -> Longitudinal {
        match self {
            Longitudinal::Accelerate => Longitudinal::Maintain,
            Longitudinal::Maintain => Longitudinal::Brake,
            Longitudinal::Brake | Longitudinal::HardBrake => Longitudinal::HardBrake,
        }
    }
}

impl Lateral {
    pub const ALL: [Lateral; 3] = [Lateral::Keep, Lateral::ChangeLeft, Lateral::ChangeRight];

    pub fn ordinal(self) -> usize {
        self as usize
    }

    /// Lane index delta (lane 0 is the rightmost lane).
    pub fn lane_delta(self) -> isize {
        match self {
            Lateral::Keep => 0,
            Lateral::ChangeLeft => 1,
            Lateral::ChangeRight => -1,
        }
    }

    pub fn opposite(self) -> Lateral {
        match self {
            Lateral::Keep => Lateral::Keep,
            Lateral::ChangeLeft => Lateral::ChangeRight,
            Lateral::ChangeRight => Lateral::ChangeLeft,
        }
    }

    pub fn toward(from: usize, to: usize) -> Lateral {
        match to.cmp(&from) {
            std::cmp::Ordering::Greater => Lateral::ChangeLeft,
            std::cmp::Ordering::Less => Lateral::ChangeRight,
            std::cmp::Ordering::Equal => Lateral::Keep,
        }
    }
}

/// One of the twelve discrete (longitudinal, lateral) choices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Action {
    pub longitudinal: Longitudinal,
    pub lateral: Lateral,
}

impl Action {
    pub const COUNT: usize = 12;

    pub const fn new(longitudinal: Longitudinal, lateral: Lateral) -> Self {
        Self { longitudinal, lateral }
    }

    pub fn index(self) -> usize {
        3 * self.longitudinal.ordinal() + self.lateral.ordinal()
    }

    /// Inverse of [`Action::index`]; `None` outside `0..12`.
    pub fn from_index(index: usize) -> Option<Self> {
        if index >= Self::COUNT {
            return None;
        }
        Some(Self {
            longitudinal: Longitudinal::ALL[index / 3],
            lateral: Lateral::ALL[index % 3],
        })
    }

    pub fn all() -> impl Iterator<Item = Action> {
        (0..Self::COUNT).filter_map(Self::from_index)
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}+{:?}", self.longitudinal, self.lateral)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn index_round_trip() {
        for i in 0..Action::COUNT {
            let a = Action::from_index(i).unwrap();
            assert_eq!(a.index(), i);
        }
        assert_eq!(Action::from_index(12), None);
        assert_eq!(Action::new(Longitudinal::HardBrake, Lateral::ChangeRight).index(), 11);
        assert_eq!(Action::new(Longitudinal::Maintain, Lateral::Keep).index(), 0);
    }

    #[test]
    fn softer_chain_ends_at_hard_brake() {
        let mut l = Longitudinal::Accelerate;
        for _ in 0..5 {
            l = l.softer();
        }
        assert_eq!(l, Longitudinal::HardBrake);
        assert_eq!(Longitudinal::Accelerate.min_aggressive(Longitudinal::Brake), Longitudinal::Brake);
    }
}
