import sys
import os

# Add src to path
current_dir = os.path.dirname(os.path.abspath(__file__))
src_dir = os.path.join(current_dir, 'src')
sys.path.insert(0, src_dir)


# Test basic imports
def test_imports():
    print("Testing imports...")

    missing = []
    for name in ("numpy", "scipy", "jinja2"):
        try:
            __import__(name)
            print(f"[OK] {name} available")
        except ImportError:
            print(f"[FAIL] {name} not available")
            missing.append(name)

    assert not missing, f"Missing packages: {', '.join(missing)}"
    print("All imports successful!")


def test_local_modules():
    print("\nTesting local modules...")

    modules = [
        ("core.config_manager", "ConfigManager"),
        ("core.run_ledger", "RunLedger"),
        ("core.report_engine", "ReportTemplateEngine"),
        ("core.flows", "Isotopy"),
        ("core.braids", "BraidWord"),
        ("core.paramorphism", "phi_estimate"),
        ("core.property_suites", "PropertyReport"),
        ("utils.logger", "setup_logger"),
    ]
    failed = []
    for module, attr in modules:
        try:
            getattr(__import__(module, fromlist=[attr]), attr)
            print(f"[OK] {attr} imported")
        except Exception as e:
            print(f"[FAIL] {attr} failed: {e}")
            failed.append(attr)

    assert not failed, f"Failed to import: {', '.join(failed)}"
    print("All local modules imported successfully!")


def test_basic_functionality(tmp_path):
    print("\nTesting basic functionality...")

    from core.config_manager import ConfigManager
    config = ConfigManager(str(tmp_path / "config"))
    print("[OK] ConfigManager created")

    from core.run_ledger import RunLedger
    ledger = RunLedger(str(tmp_path / "runs.db"))
    print("[OK] RunLedger created")

    from core.flows import lp_length, rotation
    from core.sphere_geometry import SpherePoint
    length = lp_length(rotation(SpherePoint(0.0, 0.0, 1.0), 1.0))
    print(f"[OK] Rotation length {length:.6f}")

    assert config.get_log_config()["level"] == "INFO"
    assert ledger.get_statistics()["total"] == 0
    assert abs(length - 9.8696044) < 1e-2
    print("Basic functionality test passed!")


if __name__ == "__main__":
    import tempfile
    from pathlib import Path

    print("Paramorphism Lab - Diagnostic Test")
    print("=" * 50)

    checks = [
        ("imports", test_imports),
        ("local modules", test_local_modules),
    ]
    for label, check in checks:
        try:
            check()
        except AssertionError as e:
            print(f"\n[FAIL] {label}: {e}")
            print("Please install missing dependencies:")
            print("pip install -r requirements.txt")
            sys.exit(1)

    with tempfile.TemporaryDirectory() as tmp:
        try:
            test_basic_functionality(Path(tmp))
        except Exception as e:
            print(f"[FAIL] Basic functionality test failed: {e}")
            import traceback
            traceback.print_exc()
            sys.exit(1)

    print("\n" + "=" * 50)
    print("All tests passed! You can now run:")
    print("python src/main.py run --experiment length --flow rotation --angle 1.0")
