"""
URL configuration for renet_project project.

The only web surface is the Django admin, used to browse the run registry.
"""
from django.contrib import admin
from django.urls import path

urlpatterns = [
    path('admin/', admin.site.urls),
]
