"""Portfolio-theoretic camera selection for multi-view reconstruction"""
