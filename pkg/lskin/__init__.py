# -*- coding: utf-8 -*-
"""鍵耗散 SSH Lindbladian 的精確解與數值驗證（Liouvillian 皮膚效應）"""
__version__ = "1.0.0"
