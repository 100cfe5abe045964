"""Study configuration, Monte-Carlo runner, H-limit ladder, checks and CLI."""
