"""Tests for aelpn"""
