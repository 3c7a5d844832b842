"""Shipped datasets: decomposition data and the reproduction manifest."""
