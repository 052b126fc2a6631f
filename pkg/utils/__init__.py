"""Numerical engines: tensor kernels, linear algebra, schedules, solvers and file formats"""
