#!/usr/bin/env python3
"""
Health check script for anchorchain
Verifies that the environment, packages and prompt assets are in place.
"""

import os
import sys
from pathlib import Path

from dotenv import load_dotenv

# Load environment variables from .env file
load_dotenv()

PROJECT_ROOT = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(PROJECT_ROOT))


def check_python_version():
    """Check if Python version is compatible"""
    if sys.version_info < (3, 9):
        print("❌ Python 3.9+ is required")
        return False
    print(f"✅ Python {sys.version_info.major}.{sys.version_info.minor} is compatible")
    return True


def check_dependencies():
    """Check if required packages are installed"""
    # Map package names to their actual import names
    package_imports = {
        'python-dotenv': 'dotenv',
        'pydantic': 'pydantic',
        'PyYAML': 'yaml',
        'aiosqlite': 'aiosqlite',
        'httpx': 'httpx',
        'numpy': 'numpy',
    }

    missing_packages = []
    for package_name, import_name in package_imports.items():
        try:
            __import__(import_name)
        except ImportError:
            missing_packages.append(package_name)

    if missing_packages:
        print(f"❌ Missing packages: {', '.join(missing_packages)}")
        print("   Run: pip install -r requirements.txt")
        return False

    try:
        __import__('sentence_transformers')
        print("✅ All required packages are installed (dense scorer available)")
    except ImportError:
        print("✅ All required packages are installed (no sentence-transformers: rrf_fusion disabled)")
    return True


def check_prompts():
    """Load every prompt template the pipeline renders"""
    try:
        from anchorchain.config import PROMPT_DIRECTORY
        from anchorchain.core.prompts import load_template
        from anchorchain.errors import TemplateError
    except ImportError as e:
        print(f"❌ Cannot import anchorchain: {e}")
        return False

    names = sorted(p.stem for p in PROMPT_DIRECTORY.glob("*.yaml"))
    failed = []
    for name in names:
        try:
            load_template(name)
        except TemplateError as e:
            failed.append(f"{name} ({e})")

    if failed:
        print(f"❌ Broken prompt templates: {', '.join(failed)}")
        return False

    print(f"✅ {len(names)} prompt templates load cleanly")
    return True


def check_environment():
    """Check if the remote backend is configured"""
    from anchorchain.config import API_KEY_ENV, DEFAULT_BASE_URL

    if not os.getenv(API_KEY_ENV):
        print(f"⚠️  {API_KEY_ENV} is not set: only the oracle backend and exact-match judge will work")
        return True

    print(f"✅ API key set; remote backend at {DEFAULT_BASE_URL}")
    return True


def main():
    """Run all health checks"""
    print("🏥 Running health checks for anchorchain...\n")

    checks = [
        check_python_version,
        check_dependencies,
        check_prompts,
        check_environment,
    ]

    passed = 0
    total = len(checks)

    for check in checks:
        if check():
            passed += 1
        print()

    print(f"📊 Health check results: {passed}/{total} checks passed")

    if passed == total:
        print("🎉 All systems are go! Try: python -m anchorchain synth data/syn")
        return 0
    else:
        print("⚠️  Some issues were found. Please fix them before running experiments.")
        return 1


if __name__ == "__main__":
    sys.exit(main())
