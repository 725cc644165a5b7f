"""Simulador de electrodinámica cuántica de guía de ondas con átomos gigantes en una superred metamaterial zurda."""
__version__ = '1.0.0'
