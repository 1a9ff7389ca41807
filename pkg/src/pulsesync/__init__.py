"""Pulse-coupled phase synchronization on graphs."""
