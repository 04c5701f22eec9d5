"""Scaling fits, effective-size predictors and curve collapse"""
