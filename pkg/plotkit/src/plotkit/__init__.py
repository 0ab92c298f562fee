"""Figure rendering for the delayed-feedback simulator's sweep CSVs.

Three plot kinds: normalized-probability-vs-delay curves, phase/delay heat
maps of the two-to-one photon ratio, and p(n) bar charts.  File output only;
nothing here opens a window, and the simulator never depends on this
package.
"""

from .io import PlotError, read_table
from .render import PlotJob, PlotResult, render

__version__ = "0.1.0"
