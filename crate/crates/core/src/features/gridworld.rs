use crate::domain::StateId;
use crate::envs::GridworldEnv;

/// Scaled coordinates `x`, `y`, then indicators `[x < k]` and `[y < k]` for
/// `k = 1..size`. 64 components on the 32x32 grid.
pub fn gridworld_reward_features(env: &GridworldEnv, s: StateId) -> Vec<f64> {
    let n = env.size();
    let (x, y) = env.coords(s);
    let denom = (n - 1).max(1) as f64;
    let mut f = Vec::with_capacity(2 * n);
    f.push(x as f64 / denom);
    f.push(y as f64 / denom);
    f.extend((1..n).map(|k| f64::from(u8::from(x < k))));
    f.extend((1..n).map(|k| f64::from(u8::from(y < k))));
    f
}

pub(crate) fn names(size: usize) -> Vec<String> {
    let mut names = vec!["x".to_string(), "y".to_string()];
    names.extend((1..size).map(|k| format!("x_lt_{k}")));
    names.extend((1..size).map(|k| format!("y_lt_{k}")));
    names
}
