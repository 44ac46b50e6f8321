"""Published default constants for the classic QRS detectors.

Values follow the detectors' original descriptions where they state them;
the remaining ones are the widely used open-source defaults.
"""

MIN_FS = 100.0
MIN_DURATION_S = 2.0
REFRACTORY_S = 0.200

# Hamilton (2002 open-source ECG analysis package)
HAMILTON_BAND_HZ = (8.0, 16.0)
HAMILTON_MA_S = 0.080
HAMILTON_TH = 0.3125  # DT = NPK + TH * (QPK - NPK)
HAMILTON_BUFFER = 8
HAMILTON_SEARCHBACK_RR = 1.5
HAMILTON_SEARCHBACK_MIN_S = 0.360
HAMILTON_TWAVE_S = 0.360
HAMILTON_INIT_S = 8.0
HAMILTON_REFINE_S = 0.100

# Christov (2004, combined adaptive threshold)
CHRISTOV_POWERLINE_MA_S = 0.020
CHRISTOV_EMG_MA_S = 0.028
CHRISTOV_COMPLEX_MA_S = 0.040
CHRISTOV_M_FACTOR = 0.6
CHRISTOV_M_CLAMP = (1.5, 1.1)  # newM > 1.5 * M is replaced by 1.1 * M
CHRISTOV_M_DECAY_END_S = 1.2
CHRISTOV_M_DECAY_TO = 0.6
CHRISTOV_F_WINDOW_S = 0.350
CHRISTOV_F_SUB_S = 0.050
# F is the mean of the running 50 ms maximum over the last 300 ms; the published
# divisor 150 is that span in samples at 500 Hz
CHRISTOV_R_DECAY_SLOWER = 1.4
CHRISTOV_RR_BUFFER = 5
CHRISTOV_INIT_S = 5.0
CHRISTOV_REFINE_S = 0.100
# the complex is located over the refractory window that the detection owns,
# the same window the M refresh takes its maximum over
CHRISTOV_LOCATE_S = REFRACTORY_S

# Stationary wavelet detector
SWT_WAVELET = "db4"
SWT_SMOOTH_S = 0.100
SWT_REFINE_S = 0.050
# (upper fs bound, level): first row whose bound exceeds fs wins. The chosen
# detail band sits near 16-32 Hz where QRS energy concentrates (level 3 at
# 250-360 Hz, level 4 at 500 Hz); bounds are the geometric midpoints.
SWT_LEVEL_BY_FS = ((181.0, 2), (362.0, 3), (724.0, 4), (1448.0, 5), (float("inf"), 6))

# Pan-Tompkins style adaptive thresholding shared by the SWT detector
PT_SIGNAL_RATE = 0.125
PT_NOISE_RATE = 0.125
PT_THRESHOLD_FRACTION = 0.25
PT_SEARCHBACK_RR = 1.66
