"""Stateless HTTP reward service."""

from tubetopo.service.app import create_app

__all__ = ["create_app"]
