"""Blocked random restrictions, canonical decision trees and the witness encoding."""
