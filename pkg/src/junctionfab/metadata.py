__authors__ = ['JunctionFab developers']
__contact__ = 'junctionfab@users.noreply.github.com'
__copyright__ = 'Copyright 2026, JunctionFab developers'
__date__ = '2026/10/18'
__deprecated__ = False
__license__ = 'EUPL-1.2'
__status__ = 'Development'
__version__ = '0.1.0'
# major.minor of the junction dataset CSV layout
__csv_schema__ = '1.0'
__all__ = [
    '__authors__',
    '__contact__',
    '__copyright__',
    '__date__',
    '__deprecated__',
    '__license__',
    '__status__',
    '__version__',
    '__csv_schema__']
