"""Shape-based reactive control for snake robots with directional compliance."""
