use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Root of every random stream. Stochastic operations take a `Seed` and build
/// their own generator from it; child streams are derived by mixing in a tag,
/// so no two consumers share generator state.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Seed(pub u64);

// splitmix64 finalizer
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl Seed {
    pub fn value(self) -> u64 {
        self.0
    }

    /// Independent child seed for the stream named `tag`.
    pub fn derive(self, tag: &str) -> Seed {
        let mut h = mix(self.0);
        for b in tag.bytes() {
            h = mix(h ^ u64::from(b));
        }
        Seed(h)
    }

    /// Independent child seed for the `index`-th member of a family.
    pub fn derive_index(self, index: u64) -> Seed {
        Seed(mix(
            mix(self.0) ^ mix(index.wrapping_add(0x5851_F42D_4C95_7F2D))
        ))
    }

    pub fn rng(self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.0)
    }
}

impl From<u64> for Seed {
    fn from(v: u64) -> Self {
        Seed(v)
    }
}
