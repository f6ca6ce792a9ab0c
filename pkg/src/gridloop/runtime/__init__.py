"""Configuration, backtest and paper-trade orchestration, reports and CLI."""
