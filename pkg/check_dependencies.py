#!/usr/bin/env python3
"""
Check and install dependencies for the Pearcey lab.
"""

import sys
import subprocess
import importlib


def check_module(module_name, package_name=None):
    """Check if a module is available and try to import it."""
    if package_name is None:
        package_name = module_name

    try:
        module = importlib.import_module(module_name)
        version = getattr(module, "__version__", "unknown version")
        print(f"✅ {module_name} {version} - Available")
        return True
    except ImportError:
        print(f"❌ {module_name} - Missing (install with: pip install {package_name})")
        return False


def install_package(package_name):
    """Install a package using pip."""
    try:
        print(f"Installing {package_name}...")
        subprocess.check_call([sys.executable, "-m", "pip", "install", package_name])
        print(f"✅ {package_name} installed successfully")
        return True
    except subprocess.CalledProcessError:
        print(f"❌ Failed to install {package_name}")
        return False


def main(install=False):
    """Check and optionally install dependencies."""
    print("🔍 Checking Pearcey Lab Dependencies")
    print("=" * 50)

    # Needed to run the lab
    runtime_packages = [
        ("numpy", "numpy"),
        ("scipy", "scipy"),
    ]

    # Needed to run the test suite
    test_packages = [
        ("pytest", "pytest"),
        ("pytest_cov", "pytest-cov"),
        ("hypothesis", "hypothesis"),
        ("mpmath", "mpmath"),
    ]

    print("\n📦 Runtime Packages:")
    missing_packages = []
    for module, package in runtime_packages:
        if not check_module(module, package):
            missing_packages.append(package)

    print("\n🧪 Test Packages:")
    for module, package in test_packages:
        if not check_module(module, package):
            missing_packages.append(package)

    if missing_packages and install:
        print(f"\n🔧 Installing {len(missing_packages)} missing packages...")
        for package in missing_packages:
            install_package(package)
    elif missing_packages:
        print(f"\n⚠️ Missing: {' '.join(missing_packages)} (rerun with --install)")
    else:
        print("\n✅ All dependencies are already installed!")

    print("\n📝 To run the lab:")
    print("   python start_lab.py genfun --x 1 --u 1 --r 4 --nodes 60")
    return 0 if not missing_packages else 1


if __name__ == "__main__":
    raise SystemExit(main(install="--install" in sys.argv[1:]))
