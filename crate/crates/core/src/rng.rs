//! Counter-based random streams.
//!
//! Every stream is a ChaCha12 keystream whose key comes from the master seed
//! and a purpose tag, and whose stream id is the item index. Streams are
//! independent of how many items exist and of the order they are consumed in.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

const TRAJECTORY: u64 = 0x7472_616a_6563_746f;
const INSTANCE: u64 = 0x696e_7374_616e_6365;
const ERRORS: u64 = 0x6572_726f_7273_5f5f;

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Stream `index` of the family `(master_seed, purpose)`.
pub fn stream(master_seed: u64, purpose: u64, index: u64) -> ChaCha12Rng {
    let mut state = master_seed ^ purpose;
    let mut key = [0u8; 32];
    for chunk in key.chunks_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    let mut rng = ChaCha12Rng::from_seed(key);
    rng.set_stream(index);
    rng
}

pub fn trajectory_stream(master_seed: u64, traj_index: u64) -> ChaCha12Rng {
    stream(master_seed, TRAJECTORY, traj_index)
}

pub fn error_stream(master_seed: u64, sample_index: u64) -> ChaCha12Rng {
    stream(master_seed, ERRORS, sample_index)
}

/// Seed of instance `index` in an ensemble; adding instances never changes earlier ones.
pub fn instance_seed(master_seed: u64, index: u64) -> u64 {
    let mut state = master_seed ^ INSTANCE;
    let a = splitmix64(&mut state);
    let mut state = a ^ index.wrapping_mul(0xd1b5_4a32_d192_ed03);
    splitmix64(&mut state)
}
