"""Policy network, checkpoints and PPO training."""
